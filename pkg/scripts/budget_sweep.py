#!/usr/bin/env python3
"""Budget-response sweep: steps and accuracy vs budget multiple.

Sweeps budget multiples 1x-5x for a budget-aware game policy and an
approach-ladder ML policy. Step counts grow with the budget; ML accuracy
climbs while better approaches fit and plateaus once they all do.
"""

import argparse
from fractions import Fraction
from pathlib import Path

from timely.benchkit import EnvRef, ExperimentPlan, Regime, emit_report, run_plan
from timely.timecore import Duration, LatencyModel


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=8)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", type=Path, default=None, help="write traces and report here")
    args = parser.parse_args()

    game_plan = ExperimentPlan(
        name="budget_sweep_game",
        envs=(EnvRef("game", "mini-detective"),),
        policies=(
            {"name": "budget-aware", "kind": "budget_aware",
             "gen_time_us": 1_000_000, "safety_margin": 0.2},
        ),
        latency_regimes=(Regime("none", LatencyModel.none()),),
        budget_multiples=tuple(Fraction(k) for k in range(1, 6)),
        episodes_per_cell=args.episodes,
        base_seed=args.seed,
        step_tau=Duration.from_seconds(15),
    )
    ml_plan = ExperimentPlan(
        name="budget_sweep_ml",
        envs=(EnvRef("ml", "leaf_classification"),),
        policies=(
            {"name": "ladder", "kind": "ml_ladder", "gen_time_us": 1_000_000,
             "approaches": ["logistic_baseline", "random_forest", "gradient_boosting"]},
        ),
        latency_regimes=(Regime("none", LatencyModel.none()),),
        budget_multiples=tuple(Fraction(k) for k in range(1, 6)),
        episodes_per_cell=args.episodes,
        base_seed=args.seed,
        step_tau=Duration.from_seconds(12),
    )

    for plan in (game_plan, ml_plan):
        cells = run_plan(plan, out_dir=args.out)
        if args.out is not None:
            for path in emit_report(cells, args.out / plan.name, fmt="csv"):
                print(f"wrote {path}")
        print(f"\n{plan.name}")
        print(f"{'multiple':>8} {'mean steps':>10} {'accuracy':>9} {'on-time':>8}")
        for cell in cells:
            print(
                f"{cell.coords.budget_multiple:>8} {cell.mean_steps:>10.1f} "
                f"{cell.mean_accuracy:>9.4f} {cell.on_time_rate_value:>8.2f}"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
