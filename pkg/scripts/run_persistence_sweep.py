#!/usr/bin/env python3
"""Run a condensation-persistence sweep and summarize the trend.

Usage: python scripts/run_persistence_sweep.py [--config configs/default.cfg]
                                               [--out out/sweep.csv]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dimred.config import Config, ExperimentConfig
from dimred.errors import DimredError
from dimred.harness import fit_rate, run_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/default.cfg")
    ap.add_argument("--out", default="out/sweep.csv")
    args = ap.parse_args()

    env = ExperimentConfig.from_config(Config.from_file(args.config))
    result = run_sweep(env, out_path=args.out)
    print(f"wrote {args.out}: {len(result.rows)} rows, {len(result.failures)} failures")
    for failure in result.failures:
        print(f"  FAILED N={failure[0]}: {failure[2]}: {failure[3]}")

    print(f"{'N':>4} {'eps':>8} {'mu/eps':>8} {'trace_dist':>11} "
          f"{'alpha_xi':>10} {'rate R':>9} {'exc_frac':>9}")
    for r in result.rows:
        print(f"{r.n_particles:>4} {r.epsilon:>8.4f} {r.mu / r.epsilon:>8.4f} "
              f"{r.trace_distance:>11.5f} {r.alpha_xi:>10.5f} "
              f"{r.theoretical_rate:>9.4f} {r.excited_fraction:>9.5f}")

    tds = [r.trace_distance for r in result.rows]
    print("strictly decreasing in N:", all(b < a for a, b in zip(tds, tds[1:])))
    try:
        fit = fit_rate(result.rows)
        print(f"trace distance vs sqrt(R): constant {fit.constant:.3g}, "
              f"slope {fit.slope:.3f}, r^2 {fit.r_squared:.4f}")
    except DimredError as exc:
        print(f"rate fit skipped: {exc}")


if __name__ == "__main__":
    main()
