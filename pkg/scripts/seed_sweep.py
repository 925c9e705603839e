"""Multi-seed cumulative-reward comparison of all seven agents.

Runs the full pipeline (data, demand fit, sparse and dense training,
evaluation) per seed, writes each seed's curves, chart and ranking, and
prints which qualitative orderings held.

    python scripts/seed_sweep.py --seeds 1 2 3 4 5 --out runs/seeds
"""
import argparse
import json
import logging
from pathlib import Path

from pcwlab.config import RunConfig, load_config
from pcwlab.evaluator import cumulative_curves, curves_csv, ranking_table, summarize
from pcwlab.pipeline import run_pipeline
from pcwlab.report import render_svg

MODEL_BASED = ("mb_unbiased", "mb_over", "mb_under")


def orderings(final: dict) -> dict:
    return {
        "hybrid>standard": final["hybrid_rl"] > final["standard_rl"],
        "hybrid>model_based": all(final["hybrid_rl"] > final[m] for m in MODEL_BASED),
        "perfect>hybrid": final["perfect_info"] > final["hybrid_rl"],
        "random<0": final["random"] < 0,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--iterations", type=int, help="override the training budget")
    ap.add_argument("--out", default="runs/seeds")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    base = load_config(args.config) if args.config else RunConfig()
    if args.iterations:
        from dataclasses import replace
        base = replace(base, train=replace(base.train, iterations=args.iterations))
    summary = {}
    for seed in args.seeds:
        res = run_pipeline(base.with_seed(seed))
        out = Path(args.out) / f"seed{seed}"
        out.mkdir(parents=True, exist_ok=True)
        curves = cumulative_curves(res.trace)
        (out / "curves.csv").write_text(curves_csv(curves))
        (out / "report.svg").write_text(render_svg(curves, f"seed {seed}"))
        table = summarize(res.trace)
        (out / "ranking.txt").write_text(ranking_table(table))
        final = {s.agent: s.expected for s in table}
        checks = orderings(final)
        summary[seed] = {"final_expected": final, "checks": checks, "timings": res.timings}
        print(f"seed {seed}: {sum(checks.values())}/4 orderings hold")
        print(ranking_table(table))
    held = sum(all(v["checks"].values()) for v in summary.values())
    print(f"all orderings hold in {held}/{len(summary)} seeds")
    (Path(args.out) / "summary.json").write_text(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
