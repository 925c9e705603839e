"""Fitted vs true demand curve on the historical quote pool.

    python scripts/conversion_fit.py --seed 0 --out runs/conversion_fit.svg
"""
import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pcwlab.conversion import BIN_HI, BIN_LO, TrueConversionModel, empirical_bins, fit_conversion
from pcwlab.datagen import GenConfig, build_training_pool, generate_customers

ap = argparse.ArgumentParser()
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--resamples", type=int, default=5_000_000)
ap.add_argument("--out", default="conversion_fit.svg")
args = ap.parse_args()

cfg = GenConfig(seed=args.seed, n_resamples=args.resamples)
train, _ = generate_customers(cfg)
pool = build_training_pool(train, TrueConversionModel(), cfg)
model = fit_conversion(pool)
bins, counts, rates = empirical_bins(pool.normalized_prices(), pool.accepted)
z = np.arange(BIN_LO, BIN_HI + 1) / 100

print(f"pool acceptance rate {pool.accepted.mean():.4f}")
n = counts[49:-50]
mask = (n >= 500) & (z <= -0.1)
err = np.abs(model.values[mask] - TrueConversionModel()(z[mask]))
print(f"max |p_hat - p| over {mask.sum()} well-populated bins: {err.max():.4f}")

with plt.rc_context({"svg.hashsalt": "pcwlab"}):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(bins / 100, rates, ".", ms=2, alpha=0.4, label="empirical bin rate")
    ax.plot(z, TrueConversionModel()(z), label="true")
    ax.plot(z, model.values, label="fitted")
    ax.set_xlim(-7, 7)
    ax.set_xlabel("normalised price z")
    ax.set_ylabel("acceptance probability")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, metadata={"Date": None})
print(f"wrote {args.out}")
