"""Synthetic price-comparison market: customers, market quantiles, quote history.

Every random draw is keyed by ``(seed, purpose, customer id or row, draw)`` so
any customer or pool row can be regenerated on its own.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import truncnorm

from . import rng
from .conversion import normalized_price, true_conversion
from .domain import N_FEATURES, CustomerRecord, Dataset, fmt

# market-index weights on standardised features (age, vehicle value, NCD years,
# mileage, six continuous scores, six binary flags)
DEFAULT_WEIGHTS = (
    -0.15, 0.12, -0.10, 0.08,
    0.06, -0.05, 0.04, 0.03, -0.03, 0.02,
    0.07, 0.05, -0.04, 0.04, 0.03, -0.02,
)

TOP5_CLAMP = (100.0, 5000.0)
BURN_FLOOR = 0.05
TOP610_RATIO_FLOOR = 1.05
PREMIUM_FLOOR = 0.1

_MILEAGE_MEAN, _MILEAGE_SD, _MILEAGE_MIN = 8000.0, 3000.0, 1000.0
_MILEAGE_A = (_MILEAGE_MIN - _MILEAGE_MEAN) / _MILEAGE_SD


@dataclass(frozen=True)
class GenConfig:
    n_customers: int = 35000
    n_train: int = 28000
    n_test: int = 7000
    n_resamples: int = 5_000_000
    seed: int = 0
    feature_weights: tuple[float, ...] = DEFAULT_WEIGHTS
    base_premium: float = 600.0
    top5_noise_sd: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "feature_weights", tuple(float(w) for w in self.feature_weights))
        if min(self.n_customers, self.n_train, self.n_test, self.n_resamples) <= 0:
            raise ValueError("all counts must be positive")
        if self.n_train + self.n_test != self.n_customers:
            raise ValueError("n_train + n_test must equal n_customers")
        if len(self.feature_weights) != N_FEATURES:
            raise ValueError(f"feature_weights needs {N_FEATURES} entries")
        if self.base_premium <= 0:
            raise ValueError("base_premium must be positive")


def feature_moments() -> tuple[np.ndarray, np.ndarray]:
    """Population mean and standard deviation of each generated feature."""
    mean = np.empty(N_FEATURES)
    sd = np.empty(N_FEATURES)
    mean[0], sd[0] = 49.0, 62.0 / math.sqrt(12.0)
    s2 = 0.25
    mean[1] = 8000.0 * math.exp(s2 / 2)
    sd[1] = math.sqrt((math.exp(s2) - 1.0) * 8000.0**2 * math.exp(s2))
    mean[2], sd[2] = 4.5, math.sqrt(99.0 / 12.0)
    tn = truncnorm(_MILEAGE_A, np.inf, loc=_MILEAGE_MEAN, scale=_MILEAGE_SD)
    mean[3], sd[3] = tn.mean(), tn.std()
    mean[4:10], sd[4:10] = 0.0, 1.0
    mean[10:], sd[10:] = 0.3, math.sqrt(0.21)
    return mean, sd


def draw_features(seed: int, ids) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    u = np.stack([rng.uniform(seed, "features", ids, k) for k in range(N_FEATURES)], axis=1)
    x = np.empty_like(u)
    x[:, 0] = 18.0 + 62.0 * u[:, 0]
    x[:, 1] = np.exp(math.log(8000.0) + 0.5 * ndtri(u[:, 1]))
    x[:, 2] = np.floor(10.0 * u[:, 2])
    lo = ndtr(_MILEAGE_A)
    x[:, 3] = _MILEAGE_MEAN + _MILEAGE_SD * ndtri(lo + u[:, 3] * (1.0 - lo))
    x[:, 4:10] = ndtri(u[:, 4:10])
    x[:, 10:] = (u[:, 10:] < 0.3).astype(np.float64)
    return x


def augment_from_factors(avg_top5, burn_factor, premium_factor, top610_factor):
    """Apply the market scalings to already-drawn normal factors.

    Burn factor is floored at 0.05; the top-6-10 ratio is ``|factor|`` floored
    at 1.05 so the market spread stays positive.
    """
    avg_top5 = np.asarray(avg_top5, dtype=float)
    burn = avg_top5 * np.maximum(burn_factor, BURN_FLOOR)
    bench = avg_top5 * np.asarray(premium_factor, dtype=float)
    top610 = avg_top5 * np.maximum(np.abs(top610_factor), TOP610_RATIO_FLOOR)
    return burn, bench, top610


def augment_record(avg_top5: float, stream: rng.Stream) -> tuple[float, float, float]:
    """(burn_cost, benchmark_premium, avg_top6_10) for one customer."""
    if not avg_top5 > 0:
        raise ValueError("avg_top5 must be positive")
    b, p0, t = augment_from_factors(
        avg_top5,
        stream.normal(_AUG_DRAWS[0], 0.8, 0.2),
        stream.normal(_AUG_DRAWS[1], 1.0, 0.1),
        stream.normal(_AUG_DRAWS[2], 1.0, 0.3),
    )
    return float(b), float(p0), float(t)


# draw indices inside the per-customer "customer" stream
_LINK_DRAW = 0
_AUG_DRAWS = (1, 2, 3)


def generate_all(config: GenConfig) -> Dataset:
    """All ``n_customers`` records (ids 0..n-1), before the train/test split."""
    ids = np.arange(config.n_customers, dtype=np.int64)
    x = draw_features(config.seed, ids)
    mean, sd = feature_moments()
    index = ((x - mean) / sd) @ np.asarray(config.feature_weights)
    noise = np.exp(rng.normal(config.seed, "customer", ids, _LINK_DRAW, 0.0, config.top5_noise_sd))
    top5 = np.clip(config.base_premium * np.exp(index) * noise, *TOP5_CLAMP)
    burn, bench, top610 = augment_from_factors(
        top5,
        rng.normal(config.seed, "customer", ids, _AUG_DRAWS[0], 0.8, 0.2),
        rng.normal(config.seed, "customer", ids, _AUG_DRAWS[1], 1.0, 0.1),
        rng.normal(config.seed, "customer", ids, _AUG_DRAWS[2], 1.0, 0.3),
    )
    return Dataset(ids, x, top5, top610, bench, burn, "train")


def generate_customers(config: GenConfig) -> tuple[Dataset, Dataset]:
    """Generate the market and split it into (train, test), each ordered by id."""
    full = generate_all(config)
    order = np.argsort(rng.uniform(config.seed, "split", full.ids), kind="stable")
    train_idx = np.sort(order[: config.n_train])
    test_idx = np.sort(order[config.n_train:])
    return full.take(train_idx, "train"), full.take(test_idx, "test")


@dataclass(frozen=True)
class ResampledQuote:
    record: CustomerRecord
    premium: float
    accepted: bool
    u: float

    def __post_init__(self):
        if not self.premium > 0:
            raise ValueError("premium must be positive")


@dataclass
class TrainingPool:
    """Historical quotes resampled from the training customers (column form)."""

    train: Dataset
    customer_index: np.ndarray
    premium: np.ndarray
    u: np.ndarray
    accepted: np.ndarray
    seed: int = 0
    _z: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.premium)

    def __getitem__(self, i: int) -> ResampledQuote:
        return ResampledQuote(self.train[int(self.customer_index[i])], float(self.premium[i]),
                              bool(self.accepted[i]), float(self.u[i]))

    @property
    def customer_ids(self) -> np.ndarray:
        return self.train.ids[self.customer_index]

    def normalized_prices(self) -> np.ndarray:
        if self._z is None:
            ci = self.customer_index
            self._z = normalized_price(self.premium, self.train.avg_top5[ci], self.train.avg_top6_10[ci])
        return self._z

    def to_jsonl(self, fh) -> None:
        """One ``{"customer_id", "premium", "accepted", "u"}`` object per line."""
        ids = self.customer_ids
        for cid, p, a, u in zip(ids.tolist(), self.premium.tolist(), self.accepted.tolist(), self.u.tolist()):
            fh.write('{"customer_id":%d,"premium":%s,"accepted":%s,"u":%s}\n'
                     % (cid, fmt(p), "true" if a else "false", fmt(u)))

    @classmethod
    def from_jsonl(cls, fh, train: Dataset) -> "TrainingPool":
        cids, prem, acc, us = [], [], [], []
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            cids.append(row["customer_id"])
            prem.append(row["premium"])
            acc.append(row["accepted"])
            us.append(row.get("u", np.nan))
        lookup = {int(c): i for i, c in enumerate(train.ids)}
        try:
            ci = np.array([lookup[c] for c in cids], dtype=np.int64)
        except KeyError as e:
            raise ValueError(f"pool references customer {e.args[0]} not in the training set") from None
        return cls(train, ci, np.array(prem, dtype=float), np.array(us, dtype=float),
                   np.array(acc, dtype=bool))

    def to_jsonl_string(self) -> str:
        buf = io.StringIO()
        self.to_jsonl(buf)
        return buf.getvalue()


def build_training_pool(train: Dataset, true_model, config: GenConfig) -> TrainingPool:
    """Resample ``n_resamples`` historical quotes and their accept decisions."""
    if len(train) == 0:
        raise ValueError("training dataset is empty")
    rows = np.arange(config.n_resamples, dtype=np.int64)
    ci = rng.integers(config.seed, "pool", rows, 0, len(train))
    factor = np.maximum(rng.normal(config.seed, "pool", rows, 1, 1.0, 0.3), PREMIUM_FLOOR)
    premium = train.avg_top5[ci] * factor
    u = rng.uniform(config.seed, "pool", rows, 2)
    z = normalized_price(premium, train.avg_top5[ci], train.avg_top6_10[ci])
    accepted = u <= true_model(z)
    pool = TrainingPool(train, ci, premium, u, accepted, config.seed)
    pool._z = z
    return pool


def expected_acceptance_rate(train: Dataset, true_model, n: int = 200_000, seed: int = 12345) -> float:
    """Monte Carlo E[p(z)] under the historical premium distribution.

    Uses numpy's generator rather than the keyed streams so it stays an
    independent check on ``build_training_pool``.
    """
    g = np.random.default_rng(seed)
    ci = g.integers(0, len(train), n)
    prem = train.avg_top5[ci] * np.maximum(g.normal(1.0, 0.3, n), PREMIUM_FLOOR)
    z = (prem - train.avg_top5[ci]) / (train.avg_top6_10[ci] - train.avg_top5[ci])
    return float(np.mean(true_model(z)))
