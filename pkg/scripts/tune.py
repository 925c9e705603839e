"""Learning-rate / reward-scale sweep for the dense and sparse learners.

Scores each setting by the mean expected reward per test customer of the
greedy policy.

    python scripts/tune.py --seed 1 --iterations 1000000 \
        --grid "0.01,0.001,10" "0.003,0.001,10" "0.01,0.0003,10"
"""
import argparse
import dataclasses
import time

from pcwlab.agents import ActorCriticAgent
from pcwlab.config import RunConfig
from pcwlab.conversion import TrueConversionModel, fit_conversion
from pcwlab.datagen import build_training_pool, generate_customers
from pcwlab.evaluator import evaluate
from pcwlab.pipeline import train_policy

ap = argparse.ArgumentParser()
ap.add_argument("--seed", type=int, default=1)
ap.add_argument("--iterations", type=int, default=1_000_000)
ap.add_argument("--modes", nargs="+", default=["dense", "sparse"])
ap.add_argument("--grid", nargs="+", default=["0.01,0.001,10"],
                help="actor_lr,critic_lr,reward_scale triples")
args = ap.parse_args()

base = RunConfig().with_seed(args.seed)
train, test = generate_customers(base.data)
pool = build_training_pool(train, TrueConversionModel(), base.data)
model = fit_conversion(pool)

for spec in args.grid:
    alr, clr, scale = (float(v) for v in spec.split(","))
    tc = dataclasses.replace(base.train, iterations=args.iterations, actor_lr=alr,
                             critic_lr=clr, reward_scale=scale)
    cfg = dataclasses.replace(base, train=tc)
    for mode in args.modes:
        t0 = time.perf_counter()
        params = train_policy(cfg, mode, train, pool, model)
        trace = evaluate({"ac": ActorCriticAgent(params)}, test, TrueConversionModel(), args.seed)
        print(f"{mode:6s} alr={alr:g} clr={clr:g} scale={scale:g}: "
              f"{trace.expected.mean():.3f} per customer ({time.perf_counter() - t0:.0f}s)")
