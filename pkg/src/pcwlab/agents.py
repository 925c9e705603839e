"""The seven pricing policies compared in evaluation.

Every policy maps a customer to an action index on the shared grid.  Ties in
any argmax go to the lowest index, i.e. the cheapest quote.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import approx, rng
from .conversion import true_conversion
from .domain import DEFAULT_GRID, ActionGrid, CustomerRecord, Dataset

GREEDY = "greedy"
STOCHASTIC = "stochastic"

ROSTER = ("standard_rl", "hybrid_rl", "mb_unbiased", "mb_over", "mb_under", "random", "perfect_info")


class PricingPolicy(Protocol):
    name: str

    def quote(self, record: CustomerRecord, stream: rng.Stream) -> int: ...

    def quote_batch(self, data: Dataset, seed: int) -> np.ndarray: ...


def agent_stream(seed: int, name: str, customer_id: int) -> rng.Stream:
    return rng.Stream(seed, f"agent:{name}", customer_id)


# -- actor-critic ------------------------------------------------------------

def actor_critic_quote(params: approx.PolicyParameters, record: CustomerRecord, mode: str,
                       stream: rng.Stream | None = None) -> int:
    logits = approx.actor_logits(params, params.normalize(approx.record_inputs(record)))
    return _pick(logits, mode, None if stream is None else stream.uniform(0))


def _pick(logits: np.ndarray, mode: str, u: float | None) -> int:
    if mode == GREEDY:
        return int(np.argmax(logits))
    if mode == STOCHASTIC:
        if u is None:
            raise ValueError("stochastic quoting needs a random stream")
        return int(approx._sample(approx.softmax(logits), u))
    raise ValueError(f"unknown quoting mode {mode!r}")


@dataclass
class ActorCriticAgent:
    params: approx.PolicyParameters
    mode: str = GREEDY
    name: str = "hybrid_rl"

    def quote(self, record, stream=None):
        return actor_critic_quote(self.params, record, self.mode, stream)

    def quote_batch(self, data, seed):
        X = self.params.normalize(approx.raw_inputs(data))
        logits = approx.actor_logits(self.params, X)
        if self.mode == GREEDY:
            return np.argmax(logits, axis=1)
        u = rng.uniform(seed, f"agent:{self.name}", data.ids, 0)
        return np.array([_pick(l, self.mode, ui) for l, ui in zip(logits, u)], dtype=np.int64)


# -- model-based benchmarks ---------------------------------------------------

@dataclass(frozen=True)
class BiasScenario:
    mean_scale: float = 1.0
    noise_sd: float = 0.3

    def __post_init__(self):
        if self.mean_scale <= 0 or self.noise_sd < 0:
            raise ValueError("mean_scale must be positive and noise_sd non-negative")


SCENARIOS = {
    "mb_unbiased": BiasScenario(1.0, 0.3),
    "mb_over": BiasScenario(1.2, 0.3),
    "mb_under": BiasScenario(0.8, 0.3),
}

MAX_REDRAWS = 10_000


def estimate_market(avg_top5: float, avg_top6_10: float, scenario: BiasScenario,
                    stream: rng.Stream) -> tuple[float, float]:
    """Noisy (top5, top6_10) estimates, redrawn until the spread is positive."""
    for k in range(MAX_REDRAWS):
        e5 = avg_top5 * stream.normal(2 * k, scenario.mean_scale, scenario.noise_sd)
        e610 = avg_top6_10 * stream.normal(2 * k + 1, scenario.mean_scale, scenario.noise_sd)
        if e610 > e5 + 1e-6:
            return e5, e610
    raise RuntimeError("could not draw a non-degenerate market estimate")


def best_grid_action(benchmark_premium, burn_cost, top5, top6_10, model,
                     grid: ActionGrid = DEFAULT_GRID) -> np.ndarray:
    """Argmax over the grid of ``model(z) * (P - b)``; broadcasts over customers."""
    p0 = np.asarray(benchmark_premium, dtype=float)[..., None]
    premium = grid.values * p0
    z = (premium - np.asarray(top5, dtype=float)[..., None]) / (
        np.asarray(top6_10, dtype=float) - np.asarray(top5, dtype=float))[..., None]
    objective = model(z) * (premium - np.asarray(burn_cost, dtype=float)[..., None])
    return np.argmax(objective, axis=-1)


def model_based_quote(record: CustomerRecord, scenario: BiasScenario, model,
                      stream: rng.Stream, grid: ActionGrid = DEFAULT_GRID) -> int:
    e5, e610 = estimate_market(record.avg_top5, record.avg_top6_10, scenario, stream)
    return int(best_grid_action(record.benchmark_premium, record.burn_cost, e5, e610, model, grid))


@dataclass
class ModelBasedAgent:
    """Optimises expected profit with a fitted demand curve and noisy market estimates."""

    scenario: BiasScenario
    model: object
    name: str = "mb_unbiased"
    grid: ActionGrid = DEFAULT_GRID

    def quote(self, record, stream):
        return model_based_quote(record, self.scenario, self.model, stream, self.grid)

    def estimates(self, data: Dataset, seed: int) -> tuple[np.ndarray, np.ndarray]:
        n = len(data)
        e5, e610 = np.empty(n), np.empty(n)
        todo = np.ones(n, dtype=bool)
        tag = f"agent:{self.name}"
        ms, sd = self.scenario.mean_scale, self.scenario.noise_sd
        for k in range(MAX_REDRAWS):
            ids = data.ids[todo]
            e5[todo] = data.avg_top5[todo] * rng.normal(seed, tag, ids, 2 * k, ms, sd)
            e610[todo] = data.avg_top6_10[todo] * rng.normal(seed, tag, ids, 2 * k + 1, ms, sd)
            todo = ~(e610 > e5 + 1e-6)
            if not todo.any():
                return e5, e610
        raise RuntimeError("could not draw non-degenerate market estimates")

    def quote_batch(self, data, seed):
        e5, e610 = self.estimates(data, seed)
        out = np.empty(len(data), dtype=np.int64)
        for lo in range(0, len(data), 1024):
            s = slice(lo, lo + 1024)
            out[s] = best_grid_action(data.benchmark_premium[s], data.burn_cost[s], e5[s],
                                      e610[s], self.model, self.grid)
        return out


# -- extremes ------------------------------------------------------------------

def perfect_info_quote(record: CustomerRecord, grid: ActionGrid = DEFAULT_GRID) -> int:
    return int(best_grid_action(record.benchmark_premium, record.burn_cost, record.avg_top5,
                                record.avg_top6_10, true_conversion, grid))


@dataclass
class PerfectInfoAgent:
    """Knows the true demand curve and the true market quantiles."""

    name: str = "perfect_info"
    grid: ActionGrid = DEFAULT_GRID

    def quote(self, record, stream=None):
        return perfect_info_quote(record, self.grid)

    def quote_batch(self, data, seed):
        out = np.empty(len(data), dtype=np.int64)
        for lo in range(0, len(data), 1024):
            s = slice(lo, lo + 1024)
            out[s] = best_grid_action(data.benchmark_premium[s], data.burn_cost[s],
                                      data.avg_top5[s], data.avg_top6_10[s], true_conversion,
                                      self.grid)
        return out


def random_quote(stream: rng.Stream, grid: ActionGrid = DEFAULT_GRID) -> int:
    return stream.integer(grid.count, 0)


@dataclass
class RandomAgent:
    name: str = "random"
    grid: ActionGrid = DEFAULT_GRID

    def quote(self, record, stream):
        return random_quote(stream, self.grid)

    def quote_batch(self, data, seed):
        return rng.integers(seed, f"agent:{self.name}", data.ids, 0, self.grid.count)


def build_roster(standard: approx.PolicyParameters, hybrid: approx.PolicyParameters, model,
                 ac_mode: str = GREEDY, scenarios: dict | None = None) -> dict:
    scenarios = SCENARIOS if scenarios is None else scenarios
    roster = {
        "standard_rl": ActorCriticAgent(standard, ac_mode, "standard_rl"),
        "hybrid_rl": ActorCriticAgent(hybrid, ac_mode, "hybrid_rl"),
    }
    for name, sc in scenarios.items():
        roster[name] = ModelBasedAgent(sc, model, name)
    roster["random"] = RandomAgent()
    roster["perfect_info"] = PerfectInfoAgent()
    return roster
