"""Demand curves on the normalised price scale.

The normalised price ``z = (P - top5) / (top6_10 - top5)`` says how a quote
sits relative to the market: ``z < 0`` undercuts the five cheapest insurers on
average, ``z = 1`` matches the 6th-10th ranked ones.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

FORMAT_VERSION = 1
BIN_LO = -600  # hundredths
BIN_HI = 600
# moving-average window covers bins R-49 .. R+50 (hundredths)
WINDOW_BELOW = 49
WINDOW_ABOVE = 50


class DegenerateMarketError(ValueError):
    pass


def normalized_price(premium, avg_top5, avg_top6_10):
    """Vectorised; raises if any market spread is <= 1e-9."""
    spread = np.asarray(avg_top6_10, dtype=float) - np.asarray(avg_top5, dtype=float)
    if np.any(spread <= 1e-9):
        raise DegenerateMarketError("avg_top6_10 - avg_top5 must be positive")
    z = (np.asarray(premium, dtype=float) - avg_top5) / spread
    return float(z) if np.ndim(z) == 0 else z


def true_conversion(z):
    """Analytic acceptance probability: 0.2 when far below market, 0 at or above it."""
    z = np.asarray(z, dtype=float)
    mid = -0.2 * (z / 8.0 + 1.0) ** 2 + 0.2
    p = np.where(z < -8.0, 0.2, np.where(z < 0.0, mid, 0.0))
    return float(p) if p.ndim == 0 else p


class TrueConversionModel:
    def __call__(self, z):
        return true_conversion(z)

    def scalar(self, z: float) -> float:
        return true_conversion(z)

    def __repr__(self):
        return "TrueConversionModel()"


@dataclass(frozen=True)
class ConstantConversionModel:
    """Flat demand; handy for tests and degenerate baselines."""

    p: float

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = np.full(z.shape, self.p)
        return float(out) if out.ndim == 0 else out

    def scalar(self, z: float) -> float:
        return self.p


def bin_index(z) -> np.ndarray:
    """Integer hundredths of z, rounded half-to-even."""
    return np.rint(np.asarray(z, dtype=float) * 100.0).astype(np.int64)


@dataclass(frozen=True)
class FittedConversionModel:
    """Binned, smoothed, monotone demand estimate on [-6, 6] in 0.01 steps."""

    values: np.ndarray
    left_value: float
    right_value: float
    bin_width: float = 0.01
    lo: float = -6.0
    hi: float = 6.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if len(v) != BIN_HI - BIN_LO + 1:
            raise ValueError(f"expected {BIN_HI - BIN_LO + 1} bin values, got {len(v)}")

    @property
    def bin_centers(self) -> np.ndarray:
        return np.arange(BIN_LO, BIN_HI + 1) / 100.0

    def __call__(self, z):
        return fitted_conversion(self, z)

    def scalar(self, z: float) -> float:
        """Fast single-value lookup, identical to ``fitted_conversion``."""
        k = int(round(z * 100.0))
        if k < BIN_LO:
            return self.left_value
        if k > BIN_HI:
            return self.right_value
        return float(self.values[k - BIN_LO])

    def to_json(self) -> str:
        return json.dumps({
            "bin_width": self.bin_width, "lo": self.lo, "hi": self.hi,
            "values": [float(v) for v in self.values],
            "left": float(self.left_value), "right": float(self.right_value),
            "version": FORMAT_VERSION,
        })

    @classmethod
    def from_json(cls, text: str) -> "FittedConversionModel":
        d = json.loads(text)
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported conversion model version {d.get('version')!r}")
        return cls(np.array(d["values"], dtype=np.float64), float(d["left"]), float(d["right"]),
                   float(d["bin_width"]), float(d["lo"]), float(d["hi"]))

    def __eq__(self, other):
        if not isinstance(other, FittedConversionModel):
            return NotImplemented
        return (np.array_equal(self.values, other.values)
                and self.left_value == other.left_value and self.right_value == other.right_value)

    __hash__ = None


def fitted_conversion(model: FittedConversionModel, z):
    k = bin_index(z)
    inside = np.clip(k, BIN_LO, BIN_HI) - BIN_LO
    p = np.where(k < BIN_LO, model.left_value,
                 np.where(k > BIN_HI, model.right_value, model.values[inside]))
    return float(p) if p.ndim == 0 else p


def empirical_bins(z, accepted):
    """Counts and acceptance rates for the bins feeding the [-6, 6] windows.

    Returns ``(bins, counts, rates)`` where ``bins`` are integer hundredths
    from -649 to 650; ``rates`` is NaN for empty bins.
    """
    k = bin_index(z)
    lo, hi = BIN_LO - WINDOW_BELOW, BIN_HI + WINDOW_ABOVE
    keep = (k >= lo) & (k <= hi)
    pos = k[keep] - lo
    y = np.asarray(accepted, dtype=np.float64)[keep]
    counts = np.bincount(pos, minlength=hi - lo + 1)
    hits = np.bincount(pos, weights=y, minlength=hi - lo + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        rates = np.where(counts > 0, hits / np.maximum(counts, 1), np.nan)
    return np.arange(lo, hi + 1), counts, rates


def smooth(rates: np.ndarray) -> np.ndarray:
    """Centred 100-bin moving average over populated bins only.

    ``rates`` spans bins -649..650; the result spans -600..600.  Windows with
    no populated bin take the value of the nearest populated window on the
    left (or, failing that, on the right).
    """
    populated = ~np.isnan(rates)
    width = WINDOW_BELOW + WINDOW_ABOVE + 1
    win_rates = sliding_window_view(np.where(populated, rates, 0.0), width)
    win_n = sliding_window_view(populated, width).sum(axis=1)
    if not win_n.any():
        raise ValueError("no observations with z in the fitting range")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(win_n > 0, win_rates.sum(axis=1) / np.maximum(win_n, 1), np.nan)
    # forward-fill gaps, then back-fill a leading gap
    idx = np.where(win_n > 0, np.arange(len(out)), -1)
    idx = np.maximum.accumulate(idx)
    first = int(np.argmax(win_n > 0))
    idx[idx < 0] = first
    return out[idx]


def monotone_pass(values: np.ndarray) -> np.ndarray:
    """Running minimum from left to right."""
    return np.minimum.accumulate(np.asarray(values, dtype=np.float64))


def fit_from_z(z, accepted) -> FittedConversionModel:
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise ValueError("cannot fit a conversion model to an empty pool")
    _, counts, rates = empirical_bins(z, accepted)
    if not counts.any():
        # nothing near the fitting range: flat curve at the pool's overall rate
        rate = float(np.mean(np.asarray(accepted, dtype=np.float64)))
        return FittedConversionModel(np.full(BIN_HI - BIN_LO + 1, rate), rate, rate)
    p_hat = monotone_pass(smooth(rates))
    return FittedConversionModel(p_hat, float(p_hat[0]), float(p_hat[-1]))


def fit_conversion(pool) -> FittedConversionModel:
    """Fit the binned estimator to a ``TrainingPool`` of historical quotes."""
    if len(pool) == 0:
        raise ValueError("cannot fit a conversion model to an empty pool")
    return fit_from_z(pool.normalized_prices(), pool.accepted)
