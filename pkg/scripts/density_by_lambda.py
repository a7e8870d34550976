#!/usr/bin/env python3
"""Global density over time for stochastic Life at a few lambda_plus values.

Writes one run directory per value under --out and prints the density
reached at a handful of checkpoints, averaged over replications.
"""

import argparse
from pathlib import Path

import numpy as np

from irsim.lab import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.2734375, 0.4, 0.5, 0.6])
    ap.add_argument("--size", type=int, default=100)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--replications", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/density_by_lambda")
    args = ap.parse_args()

    checkpoints = [s for s in (1, 10, 100, 500, 1000, 2000, 5000, 10000) if s <= args.steps]
    print("lambda_plus " + " ".join(f"{s:>7d}" for s in checkpoints))
    for lam in args.lambdas:
        cfg = ExperimentConfig(model="life", lambda_plus=lam, width=args.size, height=args.size,
                               init_density=0.5, seed=args.seed, replications=args.replications,
                               t_final=args.steps, convergence_cap=None, metrics=("density",))
        result = run_experiment(cfg, Path(args.out) / f"lambda_{lam:.4f}", workers=args.workers)
        by_step = {}
        for row in result.rows:
            by_step.setdefault(row.step, []).append(row.rho)
        print(f"{lam:11.4f} " + " ".join(f"{np.mean(by_step[s]):7.3f}" for s in checkpoints))


if __name__ == "__main__":
    main()
