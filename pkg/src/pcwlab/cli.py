"""Command-line pipeline: gen-data, fit-conversion, train, evaluate, report, run-all.

Exit codes: 0 success, 2 bad config or unresolvable input path, 3 corrupt or
version-mismatched artifact.  Outputs are staged and renamed only on success.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import agents as agents_mod
from .approx import init_policy, normalizer_from_pool
from .artifacts import (ArtifactError, StagedOutputs, finish, load_conversion, load_dataset,
                        load_policy, load_pool, sha256_file)
from .config import ConfigError, RunConfig, load_config
from .conversion import TrueConversionModel, fit_conversion
from .datagen import build_training_pool, generate_customers
from .evaluator import (cumulative_curves, curves_csv, curves_from_csv, evaluate,
                        ranking_from_curves, ranking_table, summarize)
from .report import render_svg
from .simenv import DENSE, REWARD_MODES, SPARSE, PricingEnv
from .trainer import train

log = logging.getLogger("pcwlab")

EXIT_CONFIG = 2
EXIT_ARTIFACT = 3


class InputError(ConfigError):
    pass


def _require(*paths) -> dict[str, str]:
    """Fail fast (exit 2) on a missing input; return input hashes otherwise."""
    out = {}
    for p in paths:
        p = Path(p)
        if not p.is_file():
            raise InputError(str(p), "input file not found")
        out[p.name] = sha256_file(p)
    return out


def _config(args) -> RunConfig:
    if getattr(args, "config", None) is None:
        cfg = RunConfig()
    else:
        if not Path(args.config).is_file():
            raise InputError("--config", f"{args.config} not found")
        cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _emit(m: dict) -> None:
    print(json.dumps(m, sort_keys=True))


# -- stages --------------------------------------------------------------------

def cmd_gen_data(cfg: RunConfig, out) -> dict:
    train_set, test_set = generate_customers(cfg.data)
    pool = build_training_pool(train_set, TrueConversionModel(), cfg.data)
    with StagedOutputs(out) as st:
        st.write_text("train.csv", train_set.to_csv())
        st.write_text("test.csv", test_set.to_csv())
        with st.open("pool.jsonl") as fh:
            pool.to_jsonl(fh)
        return finish(st, "gen-data", cfg.seed, cfg.digest(), {})


def cmd_fit_conversion(pool_path, data_path, out, seed: int = 0) -> dict:
    inputs = _require(pool_path, data_path)
    train_set = load_dataset(data_path, "train")
    pool = load_pool(pool_path, train_set)
    model = fit_conversion(pool)
    with StagedOutputs(out) as st:
        st.write_text("conversion.json", model.to_json() + "\n")
        return finish(st, "fit-conversion", seed, "", inputs)


def cmd_train(cfg: RunConfig, mode: str, data_dir, out) -> dict:
    data_dir = Path(data_dir)
    paths = [data_dir / "train.csv", data_dir / "pool.jsonl", data_dir / "conversion.json"]
    inputs = _require(*paths)
    train_set = load_dataset(paths[0], "train")
    model = load_conversion(paths[2])
    pool = load_pool(paths[1], train_set)
    mean, scale = normalizer_from_pool(pool)
    del pool
    params = init_policy(cfg.seed, mean, scale, hidden=cfg.model.hidden)
    tcfg = cfg.for_mode(mode)
    env = PricingEnv(train_set, model, mode, cfg.seed)
    t0 = time.perf_counter()
    result = train(tcfg, env, params)
    log.info("trained %s policy in %.1fs", mode, time.perf_counter() - t0)
    result.params.meta = dict(result.params.meta, config_hash=cfg.digest())
    with StagedOutputs(out) as st:
        st.write_text(f"policy_{mode}.json", result.params.to_json() + "\n")
        st.write_text(f"train_log_{mode}.csv", result.log_csv())
        return finish(st, f"train-{mode}", cfg.seed, cfg.digest(), inputs)


def cmd_evaluate(cfg: RunConfig, policies_dir, data_path, out, conversion_path=None) -> dict:
    policies_dir = Path(policies_dir)
    conversion_path = Path(conversion_path or policies_dir / "conversion.json")
    paths = [policies_dir / f"policy_{SPARSE}.json", policies_dir / f"policy_{DENSE}.json",
             conversion_path, Path(data_path)]
    inputs = _require(*paths)
    standard, hybrid = load_policy(paths[0]), load_policy(paths[1])
    model = load_conversion(paths[2])
    test_set = load_dataset(paths[3], "test")
    roster = agents_mod.build_roster(standard, hybrid, model, cfg.evaluation.ac_mode,
                                     cfg.evaluation.bias_scenarios())
    trace = evaluate(roster, test_set, TrueConversionModel(), cfg.seed,
                     shuffle=cfg.evaluation.shuffle)
    curves = cumulative_curves(trace)
    with StagedOutputs(out) as st:
        with st.open("trace.csv") as fh:
            fh.write(trace.to_csv())
        st.write_text("curves.csv", curves_csv(curves))
        st.write_text("report.svg", render_svg(curves))
        st.write_text("ranking.txt", ranking_table(summarize(trace)))
        return finish(st, "evaluate", cfg.seed, cfg.digest(), inputs)


def cmd_report(curves_path, out, seed: int = 0) -> dict:
    inputs = _require(curves_path)
    try:
        curves = curves_from_csv(Path(curves_path).read_text())
    except ValueError as e:
        raise ArtifactError(f"corrupt curves {curves_path}: {e}") from None
    with StagedOutputs(out) as st:
        st.write_text("report.svg", render_svg(curves))
        st.write_text("ranking.txt", ranking_table(ranking_from_curves(curves)))
        return finish(st, "report", seed, "", inputs)


def cmd_run_all(cfg: RunConfig, out) -> list[dict]:
    out = Path(out)
    ms = [cmd_gen_data(cfg, out)]
    ms.append(cmd_fit_conversion(out / "pool.jsonl", out / "train.csv", out, cfg.seed))
    for mode in (SPARSE, DENSE):
        ms.append(cmd_train(cfg, mode, out, out))
    ms.append(cmd_evaluate(cfg, out, out / "test.csv", out))
    return ms


# -- argument parsing ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcwlab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="YAML run config (defaults built in)")
        sp.add_argument("--seed", type=int, help="global seed; overrides the config")
        sp.add_argument("--out", help="output directory")
        return sp

    common(sub.add_parser("gen-data", help="generate customers and the historical quote pool"))
    sp = common(sub.add_parser("fit-conversion", help="fit the demand curve to a quote pool"), False)
    sp.add_argument("--pool", required=True)
    sp.add_argument("--data", required=True, help="training customers CSV")
    sp = common(sub.add_parser("train", help="train an actor-critic pricing policy"))
    sp.add_argument("--mode", choices=REWARD_MODES, default=DENSE)
    sp.add_argument("--data", help="directory with train.csv, pool.jsonl, conversion.json")
    sp = common(sub.add_parser("evaluate", help="compare all agents on the test customers"))
    sp.add_argument("--policies", required=True, help="directory with trained policies")
    sp.add_argument("--data", required=True, help="test customers CSV")
    sp.add_argument("--conversion", help="fitted model JSON (default: <policies>/conversion.json)")
    sp = common(sub.add_parser("report", help="chart and ranking from a curves CSV"), False)
    sp.add_argument("--curves", required=True)
    common(sub.add_parser("run-all", help="full pipeline into one directory"))
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        if args.command in ("fit-conversion", "report"):
            seed = args.seed or 0
            if not args.out:
                raise ConfigError("--out", "required")
            if args.command == "report":
                _emit(cmd_report(args.curves, args.out, seed))
            else:
                _emit(cmd_fit_conversion(args.pool, args.data, args.out, seed))
            return 0
        cfg = _config(args)
        out = args.out or cfg.out
        if args.command == "gen-data":
            _emit(cmd_gen_data(cfg, out))
        elif args.command == "train":
            _emit(cmd_train(cfg, args.mode, args.data or out, out))
        elif args.command == "evaluate":
            _emit(cmd_evaluate(cfg, args.policies, args.data, out, args.conversion))
        else:
            for m in cmd_run_all(cfg, out):
                _emit(m)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactError as e:
        print(f"artifact error: {e}", file=sys.stderr)
        return EXIT_ARTIFACT
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
