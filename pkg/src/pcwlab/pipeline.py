"""In-memory end-to-end experiment: data, demand fit, two trainings, evaluation."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .agents import build_roster
from .approx import PolicyParameters, init_policy, normalizer_from_pool
from .config import RunConfig
from .conversion import FittedConversionModel, TrueConversionModel, fit_conversion
from .datagen import TrainingPool, build_training_pool, generate_customers
from .domain import Dataset
from .evaluator import EvaluationTrace, evaluate
from .simenv import DENSE, SPARSE, PricingEnv
from .trainer import train

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    train: Dataset
    test: Dataset
    pool: TrainingPool
    model: FittedConversionModel
    policies: dict[str, PolicyParameters]
    trace: EvaluationTrace
    timings: dict[str, float] = field(default_factory=dict)


def train_policy(cfg: RunConfig, mode: str, train_set: Dataset, pool: TrainingPool,
                 model: FittedConversionModel) -> PolicyParameters:
    mean, scale = normalizer_from_pool(pool)
    params = init_policy(cfg.seed, mean, scale, hidden=cfg.model.hidden)
    env = PricingEnv(train_set, model, mode, cfg.seed)
    return train(cfg.for_mode(mode), env, params).params


def run_pipeline(cfg: RunConfig) -> PipelineResult:
    t = {}
    t0 = time.perf_counter()
    train_set, test_set = generate_customers(cfg.data)
    pool = build_training_pool(train_set, TrueConversionModel(), cfg.data)
    t["data"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    model = fit_conversion(pool)
    t["fit"] = time.perf_counter() - t0
    policies = {}
    for mode in (SPARSE, DENSE):
        t0 = time.perf_counter()
        policies[mode] = train_policy(cfg, mode, train_set, pool, model)
        t[f"train_{mode}"] = time.perf_counter() - t0
        log.info("seed %d: %s training took %.0fs", cfg.seed, mode, t[f"train_{mode}"])
    t0 = time.perf_counter()
    roster = build_roster(policies[SPARSE], policies[DENSE], model, cfg.evaluation.ac_mode,
                          cfg.evaluation.bias_scenarios())
    trace = evaluate(roster, test_set, TrueConversionModel(), cfg.seed,
                     shuffle=cfg.evaluation.shuffle)
    t["evaluate"] = time.perf_counter() - t0
    return PipelineResult(train_set, test_set, pool, model, policies, trace, t)
