#!/usr/bin/env python3
"""Mean number of steps to reach a still life, swept over lambda_plus.

Capped runs count at the cap, so values outside the convergence window sit
at the cap. Results land in <out>/sweep.csv.
"""

import argparse

from irsim.lab import ExperimentConfig, lambda_grid, sweep_lambda


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--start", type=float, default=0.40)
    ap.add_argument("--stop", type=float, default=0.66)
    ap.add_argument("--step", type=float, default=0.02)
    ap.add_argument("--size", type=int, default=100)
    ap.add_argument("--cap", type=int, default=20000)
    ap.add_argument("--replications", type=int, default=10)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/convergence_sweep")
    args = ap.parse_args()

    base = ExperimentConfig(model="life", lambda_plus=args.start, width=args.size, height=args.size,
                            init_density=0.5, seed=args.seed, replications=args.replications,
                            t_final=args.cap, convergence_cap=args.cap, metrics=("density",))
    table = sweep_lambda(base, lambda_grid(args.start, args.stop, args.step), args.out, args.workers)
    print("lambda_plus       p  mean_steps  converged")
    for row in table:
        print(f"{row.lambda_plus:11.4f} {row.p:7.4f} {row.mean_steps:11.1f}  {row.converged}/{row.replications}")


if __name__ == "__main__":
    main()
