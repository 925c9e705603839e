"""Single-sample actor-critic training against the pricing simulator.

Per iteration: draw a customer, sample an action from the softmax policy,
collect the sparse or dense reward, then

    critic <- critic - 2 * lr_q * (Q(x, A) - R) * grad Q(x, A)
    actor  <- actor  + lr_a * Q(x, A) * grad log pi(A | x)

with both gradients taken at the pre-update weights.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from . import rng
from .approx import (PolicyParameters, _backprop, _backprop_head, _hidden_forward,
                     _log_softmax, _offsets, _output, _output_row, _sample, _sizes, raw_inputs)
from .conversion import BIN_HI, BIN_LO, FittedConversionModel
from .simenv import DENSE, DRAW_ACTION, DRAW_CUSTOMER, DRAW_DECISION, REWARD_MODES, PricingEnv

log = logging.getLogger(__name__)

SCHEDULES = ("constant", "inv_sqrt")


class DivergenceError(FloatingPointError):
    def __init__(self, message: str, params: PolicyParameters, iteration: int):
        super().__init__(message)
        self.params = params
        self.iteration = iteration


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 2_000_000
    actor_lr: float = 1e-2
    critic_lr: float = 1e-3
    lr_schedule: str = "constant"
    reward_mode: str = DENSE
    seed: int = 0
    reward_scale: float = 10.0  # critic regresses R / reward_scale
    baseline: bool = False
    checkpoint_every: int = 0
    log_every: int = 50_000
    max_abs_weight: float = 1e6

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.actor_lr <= 0 or self.critic_lr <= 0 or self.reward_scale <= 0:
            raise ValueError("learning rates and reward_scale must be positive")
        if self.lr_schedule not in SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {SCHEDULES}")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"reward_mode must be one of {REWARD_MODES}")
        if self.checkpoint_every < 0 or self.log_every <= 0:
            raise ValueError("checkpoint_every must be >= 0 and log_every > 0")


@dataclass
class TrainResult:
    params: PolicyParameters
    actions: np.ndarray
    rewards: np.ndarray
    accepted: np.ndarray
    customers: np.ndarray
    log_rows: list = field(default_factory=list)

    def log_csv(self) -> str:
        lines = ["iteration,mode,avg_reward_window,accept_rate_window"]
        for it, mode, r, a in self.log_rows:
            lines.append(f"{it},{mode},{r:.17g},{a:.17g}")
        return "\n".join(lines) + "\n"


@njit(cache=True)
def _quote_reward(a, grid_lo, grid_step, p0, top5, top610, burn, pvals, pleft, pright, u, dense):
    premium = (grid_lo + a * grid_step) * p0
    z = (premium - top5) / (top610 - top5)
    k = np.rint(z * 100.0)
    if k < BIN_LO:
        p = pleft
    elif k > BIN_HI:
        p = pright
    else:
        p = pvals[int(k) - BIN_LO]
    margin = premium - burn
    accepted = u <= p
    if dense:
        return p * margin, accepted
    return (margin if accepted else 0.0), accepted


@njit(cache=True)
def _train_chunk(actor, a_sizes, critic, c_sizes, X, P0, T5, T610, B,
                 pvals, pleft, pright, grid_lo, grid_step,
                 cust, ua, ud, m0, actor_lr, critic_lr, inv_sqrt, dense, reward_scale,
                 baseline, out_action, out_reward, out_accept):
    a_offs = _offsets(a_sizes)
    c_offs = _offsets(c_sizes)
    a_acts = np.zeros((a_sizes.shape[0] - 1, a_sizes.max()))
    c_acts = np.zeros((c_sizes.shape[0] - 1, c_sizes.max()))
    n_act = a_sizes[-1]
    logits = np.empty(n_act)
    logp = np.empty(n_act)
    probs = np.empty(n_act)
    dout = np.empty(n_act)
    for j in range(cust.shape[0]):
        m = m0 + j + 1
        if inv_sqrt:
            lr_a = actor_lr / np.sqrt(m)
            lr_q = critic_lr / np.sqrt(m)
        else:
            lr_a = actor_lr
            lr_q = critic_lr
        c = cust[j]
        x = X[c]
        _hidden_forward(actor, a_sizes, a_offs, x, a_acts)
        _output(actor, a_sizes, a_offs, a_acts, logits)
        _log_softmax(logits, logp)
        for k in range(n_act):
            probs[k] = np.exp(logp[k])
        a = _sample(probs, ua[j])
        R, acc = _quote_reward(a, grid_lo, grid_step, P0[c], T5[c], T610[c], B[c],
                               pvals, pleft, pright, ud[j], dense)
        _hidden_forward(critic, c_sizes, c_offs, x, c_acts)
        q = _output_row(critic, c_sizes, c_offs, c_acts, a)
        if not (np.isfinite(q) and np.isfinite(R)):
            return j
        weight = q
        if baseline:
            v = 0.0
            for k in range(n_act):
                v += probs[k] * _output_row(critic, c_sizes, c_offs, c_acts, k)
            weight = q - v
        target = R / reward_scale
        _backprop_head(critic, c_sizes, c_offs, c_acts, a, -(2.0 * lr_q * (q - target)), critic, True)
        for k in range(n_act):
            dout[k] = -probs[k]
        dout[a] += 1.0
        _backprop(actor, a_sizes, a_offs, a_acts, dout, lr_a * weight, actor, True)
        out_action[j] = a
        out_reward[j] = R
        out_accept[j] = acc
    return cust.shape[0]


def training_draws(seed: int, n_train: int, start: int, stop: int):
    """Keyed draws for iterations ``start..stop-1``: customer, action uniform, decision uniform."""
    its = np.arange(start, stop, dtype=np.int64)
    return (rng.integers(seed, "train", its, DRAW_CUSTOMER, n_train),
            rng.uniform(seed, "train", its, DRAW_ACTION),
            rng.uniform(seed, "train", its, DRAW_DECISION))


def train(config: TrainConfig, env: PricingEnv, init_params: PolicyParameters,
          checkpoint: Callable[[PolicyParameters, int], None] | None = None) -> TrainResult:
    """Run ``config.iterations`` actor-critic updates; the inputs are not modified."""
    if env.reward_mode != config.reward_mode:
        raise ValueError("environment and config disagree on reward mode")
    if not isinstance(env.model, FittedConversionModel):
        raise TypeError("training needs a fitted conversion model")
    params = init_params.copy()
    M = config.iterations
    train_set = env.train
    X = np.ascontiguousarray(params.normalize(raw_inputs(train_set)))
    a_sizes, c_sizes = _sizes(params.actor_spec), _sizes(params.critic_spec)
    if a_sizes[-1] != env.grid.count or c_sizes[-1] != env.grid.count:
        raise ValueError("network outputs must match the action grid")
    actions = np.zeros(M, dtype=np.int64)
    rewards = np.zeros(M)
    accepted = np.zeros(M, dtype=np.bool_)
    customers = np.zeros(M, dtype=np.int64)
    result = TrainResult(params, actions, rewards, accepted, customers)

    step = config.log_every
    if config.checkpoint_every:
        step = math.gcd(step, config.checkpoint_every)
    step = max(step, 1)
    seed = config.seed
    for start in range(0, M, step):
        stop = min(start + step, M)
        cust, ua, ud = training_draws(seed, len(train_set), start, stop)
        customers[start:stop] = cust
        done = _train_chunk(
            params.actor, a_sizes, params.critic, c_sizes, X,
            train_set.benchmark_premium, train_set.avg_top5, train_set.avg_top6_10,
            train_set.burn_cost, env.model.values, env.model.left_value, env.model.right_value,
            env.grid.lo, env.grid.step, cust, ua, ud, start,
            config.actor_lr, config.critic_lr, config.lr_schedule == "inv_sqrt",
            config.reward_mode == DENSE, config.reward_scale, config.baseline,
            actions[start:stop], rewards[start:stop], accepted[start:stop])
        worst = max(np.max(np.abs(params.actor)), np.max(np.abs(params.critic)))
        if done < stop - start or not np.isfinite(worst) or worst > config.max_abs_weight:
            at = start + done
            if checkpoint is not None:
                checkpoint(params, at)
            raise DivergenceError(f"training diverged near iteration {at} (max |w| = {worst})",
                                  params, at)
        if stop % config.log_every == 0 or stop == M:
            lo = max(0, stop - config.log_every)
            row = (stop, config.reward_mode, float(rewards[lo:stop].mean()),
                   float(accepted[lo:stop].mean()))
            result.log_rows.append(row)
            log.info("iter %d  avg reward %.4f  accept %.4f", *row[0:1], row[2], row[3])
        if checkpoint is not None and config.checkpoint_every and stop % config.checkpoint_every == 0:
            checkpoint(params, stop)
    params.meta = dict(params.meta, iterations=M, reward_mode=config.reward_mode, seed=seed)
    return result
