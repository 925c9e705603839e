"""Core value types: customers, the action grid, quote outcomes and datasets."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

N_FEATURES = 16
CSV_HEADER = (
    ["id"] + [f"f{i}" for i in range(1, N_FEATURES + 1)]
    + ["avg_top5", "avg_top6_10", "benchmark_premium", "burn_cost"]
)


def fmt(x: float) -> str:
    return "%.17g" % x


@dataclass(frozen=True)
class CustomerRecord:
    """One price-comparison quote request.

    ``avg_top5`` and ``avg_top6_10`` are the market quantile prices (mean of
    the five cheapest competitor quotes and of those ranked 6-10).
    """

    id: int
    features: tuple[float, ...]
    avg_top5: float
    avg_top6_10: float
    benchmark_premium: float
    burn_cost: float

    def __post_init__(self):
        if len(self.features) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} features, got {len(self.features)}")
        if not all(math.isfinite(f) for f in self.features):
            raise ValueError(f"record {self.id}: non-finite feature")
        for name in ("avg_top5", "avg_top6_10", "benchmark_premium", "burn_cost"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"record {self.id}: {name} must be positive, got {v}")
        if not self.avg_top6_10 > self.avg_top5:
            raise ValueError(f"record {self.id}: avg_top6_10 must exceed avg_top5")


@dataclass(frozen=True)
class ActionGrid:
    """Premium multipliers ``lo + k * step`` for ``k = 0 .. count - 1``."""

    lo: float = 0.7
    hi: float = 1.3
    step: float = 0.001
    count: int = 601

    def __post_init__(self):
        if self.count < 2 or self.step <= 0:
            raise ValueError("grid needs count >= 2 and a positive step")
        if abs(self.lo + (self.count - 1) * self.step - self.hi) > 1e-12:
            raise ValueError("lo + (count - 1) * step must equal hi")

    @property
    def values(self) -> np.ndarray:
        return self.lo + np.arange(self.count) * self.step

    def value(self, index: int) -> float:
        return action_value(self, index)

    def nearest_index(self, multiplier: float) -> int:
        k = int(round((multiplier - self.lo) / self.step))
        return min(max(k, 0), self.count - 1)

    def __len__(self) -> int:
        return self.count


DEFAULT_GRID = ActionGrid()


def action_value(grid: ActionGrid, index: int) -> float:
    if not 0 <= index < grid.count:
        raise IndexError(f"action index {index} outside [0, {grid.count})")
    return grid.lo + index * grid.step


def premium_for(record: CustomerRecord | float, multiplier: float) -> float:
    """Quoted premium ``multiplier * P0``; accepts a record or a bare P0."""
    p0 = record.benchmark_premium if isinstance(record, CustomerRecord) else float(record)
    if not (math.isfinite(p0) and math.isfinite(multiplier)):
        raise ValueError("premium_for needs finite inputs")
    return multiplier * p0


@dataclass(frozen=True)
class QuoteOutcome:
    customer_id: int
    action_index: int
    premium: float
    accepted: bool
    reward: float

    @classmethod
    def settle(cls, record: CustomerRecord, action_index: int, premium: float,
               accepted: bool, grid: ActionGrid = DEFAULT_GRID) -> "QuoteOutcome":
        if not 0 <= action_index < grid.count:
            raise IndexError(f"action index {action_index} outside grid")
        reward = premium - record.burn_cost if accepted else 0.0
        return cls(record.id, action_index, premium, bool(accepted), reward)


@dataclass
class Dataset:
    """Column-oriented customer table; indexing yields ``CustomerRecord``."""

    ids: np.ndarray
    features: np.ndarray
    avg_top5: np.ndarray
    avg_top6_10: np.ndarray
    benchmark_premium: np.ndarray
    burn_cost: np.ndarray
    split_tag: str = "train"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64).reshape(-1, N_FEATURES)
        for name in ("avg_top5", "avg_top6_10", "benchmark_premium", "burn_cost"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        n = len(self.ids)
        if any(len(a) != n for a in (self.features, self.avg_top5, self.avg_top6_10,
                                     self.benchmark_premium, self.burn_cost)):
            raise ValueError("column lengths differ")
        if len(np.unique(self.ids)) != n:
            raise ValueError("customer ids must be unique within a dataset")
        if self.split_tag not in ("train", "test"):
            raise ValueError(f"split_tag must be train or test, got {self.split_tag!r}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite features")
        for name in ("avg_top5", "avg_top6_10", "benchmark_premium", "burn_cost"):
            if not np.all(getattr(self, name) > 0):
                raise ValueError(f"{name} must be strictly positive")
        if not np.all(self.avg_top6_10 > self.avg_top5):
            raise ValueError("avg_top6_10 must exceed avg_top5 for every record")

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i: int) -> CustomerRecord:
        return CustomerRecord(
            int(self.ids[i]), tuple(float(v) for v in self.features[i]),
            float(self.avg_top5[i]), float(self.avg_top6_10[i]),
            float(self.benchmark_premium[i]), float(self.burn_cost[i]),
        )

    def __iter__(self) -> Iterator[CustomerRecord]:
        return (self[i] for i in range(len(self)))

    @property
    def records(self) -> list[CustomerRecord]:
        return list(self)

    def index_of(self, customer_id: int) -> int:
        lookup = self._cache.get("lookup")
        if lookup is None:
            lookup = self._cache["lookup"] = {int(c): i for i, c in enumerate(self.ids)}
        return lookup[int(customer_id)]

    def take(self, idx, split_tag: str | None = None) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.ids[idx], self.features[idx], self.avg_top5[idx],
                       self.avg_top6_10[idx], self.benchmark_premium[idx],
                       self.burn_cost[idx], split_tag or self.split_tag)

    @classmethod
    def from_records(cls, records: Sequence[CustomerRecord], split_tag: str = "train") -> "Dataset":
        return cls(
            [r.id for r in records], np.array([r.features for r in records]).reshape(-1, N_FEATURES),
            [r.avg_top5 for r in records], [r.avg_top6_10 for r in records],
            [r.benchmark_premium for r in records], [r.burn_cost for r in records], split_tag,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_HEADER) + "\n")
        cols = np.column_stack([self.features, self.avg_top5, self.avg_top6_10,
                                self.benchmark_premium, self.burn_cost])
        for cid, row in zip(self.ids, cols):
            buf.write(str(int(cid)) + "," + ",".join(fmt(v) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, split_tag: str = "train") -> "Dataset":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError("unexpected dataset CSV header")
        rows = [r for r in reader if r]
        if not rows:
            return cls(np.zeros(0, np.int64), np.zeros((0, N_FEATURES)), [], [], [], [], split_tag)
        ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
        vals = np.array([[float(v) for v in r[1:]] for r in rows])
        return cls(ids, vals[:, :N_FEATURES], vals[:, 16], vals[:, 17], vals[:, 18], vals[:, 19],
                   split_tag)


def check_disjoint(train: Dataset, test: Dataset) -> None:
    if np.intersect1d(train.ids, test.ids).size:
        raise ValueError("train and test share customer ids")
