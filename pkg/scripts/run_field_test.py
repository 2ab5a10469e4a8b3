"""Monte Carlo reproduction of the indoor field test.

Runs the shipped scenario over several seeds and prints the median and p90
errors per seed, plus how many seeds keep the median angle error under 5 deg.

    python3 scripts/run_field_test.py --seeds 10 --out results/
"""
import argparse
import time
from pathlib import Path

from rdars_isac.harness import ExperimentSpec, emit_results, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scenario", help="experiment file (default: shipped scenario)")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--first-seed", type=int, default=2024)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--out", help="directory for per-seed CSV files")
    args = ap.parse_args()

    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    print(f"{'seed':>6} {'ang_med':>8} {'ang_p90':>8} {'rng_med':>8} {'pos_med':>8} {'failed':>6} {'secs':>6}")
    under = 0
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        spec = ExperimentSpec.load(args.scenario, seed=seed, trials=args.trials)
        t0 = time.perf_counter()
        res = run_experiment(spec)
        dt = time.perf_counter() - t0
        s = res.summary
        under += s["angle_error_deg_median"] < 5.0
        print(f"{seed:>6} {s['angle_error_deg_median']:8.2f} {s['angle_error_deg_p90']:8.2f} "
              f"{s['range_error_m_median']:8.2f} {s['position_error_m_median']:8.2f} "
              f"{s['n_failed']:>6} {dt:6.2f}")
        if out:
            emit_results(res, "csv", out / f"seed-{seed}.csv")
    print(f"median angle error < 5 deg on {under}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
