"""Consistent evaluation of a roster of pricing policies on held-out customers.

One uniform ``u_t`` is drawn per customer and shared by every agent, so an
agent quoting a higher true acceptance probability can never lose a sale that
a pricier agent won.  Rewards use the true demand curve and market quantiles.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import rng
from .conversion import normalized_price, true_conversion
from .domain import DEFAULT_GRID, ActionGrid, Dataset, fmt

TRACE_HEADER = "t,customer_id,u,agent,premium,z,p_true,expected_reward,realised_reward"
CURVES_HEADER = "t,agent,cum_expected,cum_realised"


class AgentError(RuntimeError):
    pass


@dataclass
class EvaluationTrace:
    """Per-customer, per-agent quotes and rewards.  Agent-major 2-D arrays."""

    agents: tuple[str, ...]
    customer_ids: np.ndarray
    u: np.ndarray
    action: np.ndarray
    premium: np.ndarray
    z: np.ndarray
    p_true: np.ndarray
    expected: np.ndarray
    realised: np.ndarray
    margin: np.ndarray
    seed: int = 0

    def __len__(self) -> int:
        return len(self.customer_ids)

    def agent_index(self, name: str) -> int:
        return self.agents.index(name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(TRACE_HEADER + "\n")
        for t in range(len(self)):
            cid, u = int(self.customer_ids[t]), fmt(self.u[t])
            for i, name in enumerate(self.agents):
                buf.write(f"{t},{cid},{u},{name},{fmt(self.premium[i, t])},{fmt(self.z[i, t])},"
                          f"{fmt(self.p_true[i, t])},{fmt(self.expected[i, t])},"
                          f"{fmt(self.realised[i, t])}\n")
        return buf.getvalue()


def evaluation_uniforms(seed: int, customer_ids) -> np.ndarray:
    return rng.uniform(seed, "eval", np.asarray(customer_ids, dtype=np.int64), 0)


def visit_order(n: int, seed: int, shuffle: bool = False) -> np.ndarray:
    if not shuffle:
        return np.arange(n)
    return np.argsort(rng.uniform(seed, "eval-order", np.arange(n), 0), kind="stable")


def evaluate(agents: dict, test: Dataset, true_model=true_conversion, seed: int = 0,
             grid: ActionGrid = DEFAULT_GRID, shuffle: bool = False) -> EvaluationTrace:
    """Run every agent on every test customer under common random numbers."""
    order = visit_order(len(test), seed, shuffle)
    data = test.take(order) if shuffle else test
    names = tuple(agents)
    n, k = len(data), len(names)
    action = np.empty((k, n), dtype=np.int64)
    for i, name in enumerate(names):
        a = np.asarray(agents[name].quote_batch(data, seed))
        if a.shape != (n,):
            raise AgentError(f"agent {name!r} returned {a.shape} actions for {n} customers")
        bad = (a < 0) | (a >= grid.count)
        if bad.any():
            j = int(np.argmax(bad))
            raise AgentError(f"agent {name!r} chose out-of-range action {int(a[j])} "
                             f"for customer {int(data.ids[j])}")
        action[i] = a
    u = evaluation_uniforms(seed, data.ids)
    premium = grid.values[action] * data.benchmark_premium
    z = normalized_price(premium, data.avg_top5, data.avg_top6_10)
    p = np.asarray(true_model(z), dtype=float)
    margin = premium - data.burn_cost
    expected = p * margin
    realised = np.where(u <= p, margin, 0.0)
    return EvaluationTrace(names, data.ids.copy(), u, action, premium, z, p, expected,
                           realised, margin, seed)


def cumulative_curves(trace: EvaluationTrace) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    return {name: (np.cumsum(trace.expected[i]), np.cumsum(trace.realised[i]))
            for i, name in enumerate(trace.agents)}


def curves_csv(curves: dict) -> str:
    buf = io.StringIO()
    buf.write(CURVES_HEADER + "\n")
    for name, (ce, cr) in curves.items():
        for t in range(len(ce)):
            buf.write(f"{t},{name},{fmt(ce[t])},{fmt(cr[t])}\n")
    return buf.getvalue()


def curves_from_csv(text: str) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CURVES_HEADER:
        raise ValueError("not a curves CSV")
    acc: dict[str, tuple[list, list]] = {}
    for line in lines[1:]:
        if not line:
            continue
        _, name, e, r = line.split(",")
        ce, cr = acc.setdefault(name, ([], []))
        ce.append(float(e))
        cr.append(float(r))
    return {k: (np.array(v[0]), np.array(v[1])) for k, v in acc.items()}


@dataclass(frozen=True)
class Standing:
    rank: int
    agent: str
    expected: float
    realised: float
    accept_rate: float
    avg_accepted_premium: float


def summarize(trace: EvaluationTrace) -> list[Standing]:
    """Agents ranked by final cumulative expected reward (ties keep roster order)."""
    rows = []
    for i, name in enumerate(trace.agents):
        won = trace.u <= trace.p_true[i]
        avg_p = float(trace.premium[i][won].mean()) if won.any() else float("nan")
        rows.append((name, float(trace.expected[i].sum()), float(trace.realised[i].sum()),
                     float(won.mean()) if len(trace) else float("nan"), avg_p))
    rows.sort(key=lambda r: -r[1])
    return [Standing(k + 1, *r) for k, r in enumerate(rows)]


def ranking_table(standings: list[Standing]) -> str:
    head = f"{'rank':>4}  {'agent':<14}{'expected':>14}{'realised':>14}{'accept':>9}{'avg prem':>11}"
    out = [head, "-" * len(head)]
    for s in standings:
        out.append(f"{s.rank:>4}  {s.agent:<14}{s.expected:>14.2f}{s.realised:>14.2f}"
                   f"{s.accept_rate:>9.4f}{s.avg_accepted_premium:>11.2f}")
    return "\n".join(out) + "\n"


def ranking_from_curves(curves: dict) -> list[Standing]:
    """Reduced ranking when only the curves are available (no acceptance stats)."""
    rows = [(k, float(ce[-1]) if len(ce) else 0.0, float(cr[-1]) if len(cr) else 0.0)
            for k, (ce, cr) in curves.items()]
    rows.sort(key=lambda r: -r[1])
    nan = float("nan")
    return [Standing(i + 1, n, e, r, nan, nan) for i, (n, e, r) in enumerate(rows)]
