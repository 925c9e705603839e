"""Training simulator: draw a customer, quote, simulate the decision, pay out.

Acceptance uses the fitted demand curve and the customer's true market
quantiles, which are available offline even though a live agent never sees
them.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from . import rng
from .conversion import DegenerateMarketError
from .domain import DEFAULT_GRID, ActionGrid, CustomerRecord, Dataset

SPARSE = "sparse"
DENSE = "dense"
REWARD_MODES = (SPARSE, DENSE)

# draw indices within the per-iteration training stream
DRAW_CUSTOMER = 0
DRAW_ACTION = 1
DRAW_DECISION = 2


@dataclass(frozen=True)
class EnvStep:
    record: CustomerRecord
    action_index: int
    premium: float
    z: float
    p_hat: float
    u: float
    accepted: bool
    sparse_reward: float
    dense_reward: float

    def reward(self, mode: str) -> float:
        if mode == SPARSE:
            return self.sparse_reward
        if mode == DENSE:
            return self.dense_reward
        raise ValueError(f"unknown reward mode {mode!r}")

    def to_json(self) -> str:
        d = asdict(self)
        d["customer_id"] = d.pop("record")["id"]
        return json.dumps(d)


def sample_customer(train: Dataset, stream: rng.Stream) -> CustomerRecord:
    """Uniform draw with replacement; ``stream.key`` is the iteration counter."""
    return train[sample_index(train, stream)]


def sample_index(train: Dataset, stream: rng.Stream) -> int:
    if len(train) == 0:
        raise ValueError("cannot sample from an empty dataset")
    return stream.integer(len(train), DRAW_CUSTOMER)


def simulate(record: CustomerRecord, action_index: int, model, u: float,
             grid: ActionGrid = DEFAULT_GRID) -> EnvStep:
    """One quote against ``model`` with a given uniform ``u``."""
    if not 0 <= action_index < grid.count:
        raise IndexError(f"action index {action_index} outside grid")
    premium = (grid.lo + action_index * grid.step) * record.benchmark_premium
    spread = record.avg_top6_10 - record.avg_top5
    if spread <= 1e-9:
        raise DegenerateMarketError(f"record {record.id}: non-positive market spread")
    z = (premium - record.avg_top5) / spread
    p_hat = model.scalar(z)
    accepted = u <= p_hat
    margin = premium - record.burn_cost
    return EnvStep(record, action_index, premium, z, p_hat, u, accepted,
                   margin if accepted else 0.0, p_hat * margin)


def step(record: CustomerRecord, action_index: int, model, reward_mode: str,
         stream: rng.Stream, grid: ActionGrid = DEFAULT_GRID) -> EnvStep:
    if reward_mode not in REWARD_MODES:
        raise ValueError(f"unknown reward mode {reward_mode!r}")
    return simulate(record, action_index, model, stream.uniform(DRAW_DECISION), grid)


class PricingEnv:
    """Simulator over a training dataset with a fixed demand model and reward mode."""

    def __init__(self, train: Dataset, model, reward_mode: str = DENSE, seed: int = 0,
                 grid: ActionGrid = DEFAULT_GRID, trace_file=None):
        if reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward mode {reward_mode!r}")
        if len(train) == 0:
            raise ValueError("training dataset is empty")
        self.train = train
        self.model = model
        self.reward_mode = reward_mode
        self.seed = seed
        self.grid = grid
        self.trace_file = trace_file
        self._records: dict[int, CustomerRecord] = {}

    def stream(self, iteration: int) -> rng.Stream:
        return rng.Stream(self.seed, "train", iteration)

    def record(self, index: int) -> CustomerRecord:
        r = self._records.get(index)
        if r is None:
            r = self._records[index] = self.train[index]
        return r

    def step(self, index: int, action_index: int, u: float) -> EnvStep:
        s = simulate(self.record(index), action_index, self.model, u, self.grid)
        if self.trace_file is not None:
            self.trace_file.write(s.to_json() + "\n")
        return s
