#!/usr/bin/env python3
"""Compare the three search policies in the planted-error environment.

    python3 scripts/run_simulation.py --config configs/sim_study.json
    python3 scripts/run_simulation.py --sweep context_stickiness 0 0.4 0.8 1.0

The sweep re-runs the study for each value of one ``SimParams`` field and
prints the annealing-minus-greedy gap, which makes it easy to see how the
comparison depends on the environment.
"""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from llmrefine.study import StudyConfig, run_study


def print_table(result: dict) -> None:
    print(f"{'policy':<14}{'raw before':>11}{'raw after':>11}{'norm after':>11}{'corr@1':>8}{'corr@n':>8}{'monotone':>10}")
    for name, row in result["table"].items():
        if row["n"] == 0:
            print(f"{name:<14}{'(no instances)':>11}")
            continue
        print(f"{name:<14}{row['mean_raw_before']:>11.3f}{row['mean_raw_after']:>11.3f}"
              f"{row['mean_normalized_after']:>11.2f}{row['single_step_correction_rate']:>8.3f}"
              f"{row['correction_rate']:>8.3f}{row['monotone_fraction']:>10.3f}")
    cmp = result.get("annealing_vs_greedy")
    if cmp:
        lo, hi = cmp["ci95"]
        print(f"annealing - greedy: {cmp['mean_gap']:+.3f}  95% CI [{lo:+.3f}, {hi:+.3f}]  ({cmp['verdict']})")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default=str(Path(__file__).resolve().parent.parent / "configs" / "sim_study.json"))
    ap.add_argument("--n", type=int, help="override n_instances")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--sweep", nargs="+", metavar=("FIELD", "VALUE"), help="SimParams field followed by values")
    ap.add_argument("--out", help="write the full JSON result(s) here")
    args = ap.parse_args()

    cfg = StudyConfig.from_dict(json.loads(Path(args.config).read_text()))
    cfg.jobs = args.jobs
    if args.n is not None:
        cfg.n_instances = args.n

    if not args.sweep:
        result = run_study(cfg)
        print_table(result)
        results = result
    else:
        field, *values = args.sweep
        results = {}
        for v in values:
            run_cfg = replace(cfg, sim=replace(cfg.sim, **{field: float(v)}))
            print(f"\n== {field} = {v}")
            results[v] = run_study(run_cfg)
            print_table(results[v])
    if args.out:
        Path(args.out).write_text(json.dumps(results, indent=2) + "\n")


if __name__ == "__main__":
    main()
