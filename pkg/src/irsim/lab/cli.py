"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from irsim import kernel
from irsim.lab.config import ConfigError, ExperimentConfig, load_config
from irsim.lab.experiment import initial_grid, lambda_grid, run_experiment, sweep_lambda
from irsim.life import LifeParams, build_life_simulation, current_grid
from irsim.oracle import live_set, oracle_step

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irsim", description="Multi-level influence-reaction Life experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config")
        p.add_argument("--seed", type=int)
        p.add_argument("--replications", type=int)
        p.add_argument("--out")
        p.add_argument("--workers", type=int)
        return p

    common(sub.add_parser("run", help="run an experiment and write CSVs"))
    sw = common(sub.add_parser("sweep", help="mean steps to a still life over a lambda_plus range"))
    sw.add_argument("--lambda-from", type=float, required=True)
    sw.add_argument("--lambda-to", type=float, required=True)
    sw.add_argument("--lambda-step", type=float, required=True)
    common(sub.add_parser("validate", help="parse and check a config, write nothing"))
    common(sub.add_parser("oracle", help="cross-check the kernel against a direct Life implementation"))
    return ap


def _oracle(config) -> int:
    if config.model != "life":
        raise ConfigError("the oracle cross-check applies to the life model")
    if config.life_params().p != 0:
        print("note: the oracle implements plain Life; comparing at p = 0")
    mismatches = 0
    for rep in range(config.replications):
        grid = initial_grid(config, rep)
        sim = build_life_simulation(LifeParams(0.0), grid, seed=config.seed, replication=rep)
        live = live_set(grid.alive.tolist())
        for step in range(1, config.t_final + 1):
            kernel.step(sim)
            live = oracle_step(live, grid.height, grid.width)
            if live_set(current_grid(sim).alive.tolist()) != live:
                mismatches += 1
                print(f"replication {rep}: mismatch at step {step}")
                break
    print(f"{config.replications - mismatches}/{config.replications} replications identical over {config.t_final} steps")
    return EXIT_OK if mismatches == 0 else EXIT_RUNTIME


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config).with_overrides(
            seed=args.seed, replications=args.replications, output=args.out, workers=args.workers)
        if args.command == "sweep":
            values = lambda_grid(args.lambda_from, args.lambda_to, args.lambda_step)
            if config.model != "life":
                raise ConfigError("sweep needs a life config")
            for lam in values:
                ExperimentConfig.from_mapping({**config.to_mapping(), "p": None, "lambda_plus": lam})
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "validate":
            print(f"ok: {config.model}, {config.width}x{config.height}, "
                  f"{config.replications} replications, t_final={config.t_final}")
            return EXIT_OK
        if args.command == "run":
            result = run_experiment(config)
            conv = sum(r.converged for r in result.reports)
            print(f"wrote {result.out_dir} ({len(result.rows)} rows, {conv}/{len(result.reports)} converged)")
            return EXIT_OK
        if args.command == "sweep":
            table = sweep_lambda(config, values)
            print("lambda_plus,p,mean_steps,converged,replications")
            for row in table:
                print(f"{row.lambda_plus:.6g},{row.p:.6g},{row.mean_steps:.6g},{row.converged},{row.replications}")
            return EXIT_OK
        return _oracle(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
