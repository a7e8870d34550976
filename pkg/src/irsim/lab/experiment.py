"""Replicated runs, CSV output, lambda sweeps."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from irsim import kernel
from irsim.lab.config import ExperimentConfig
from irsim.lab.metrics import (
    COLUMNS, ConvergenceReport, TimeSeriesRow, changed_cells, cluster_stats,
    detect_steady, init_random_grid,
)
from irsim.life import LEVEL, build_life_simulation
from irsim.mlife import MICRO, RegionPartition, build_mlife_simulation, rejected_rate
from irsim.rng import derive_stream

log = logging.getLogger(__name__)

SUMMARY_METRICS = ("rho", "cluster_mean", "cluster_var", "r", "changed")


@dataclass
class ReplicationResult:
    rows: list
    report: ConvergenceReport
    grids: list = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replications: list
    out_dir: Path | None = None

    @property
    def rows(self) -> list:
        return [row for rep in self.replications for row in rep.rows]

    @property
    def reports(self) -> list:
        return [rep.report for rep in self.replications]


def initial_grid(config: ExperimentConfig, replication: int):
    stream = derive_stream(config.seed, (replication, "init", 0, 0))
    return init_random_grid(config.width, config.height, config.initial_density, stream)


def build_simulation(config: ExperimentConfig, replication: int, grid=None):
    grid = initial_grid(config, replication) if grid is None else grid
    if config.model == "life":
        sim = build_life_simulation(config.life_params(), grid, seed=config.seed, replication=replication)
        return sim, LEVEL
    partition = RegionPartition(config.width, config.height, config.region_size)
    sim = build_mlife_simulation(grid, partition, config.control_params(), seed=config.seed,
                                 replication=replication, meso_dt=config.meso_dt)
    return sim, MICRO


def run_replication(config: ExperimentConfig, replication: int) -> ReplicationResult:
    sim, level = build_simulation(config, replication)
    metrics = set(config.metrics)
    prev = sim.level_states[level].sigma.grid
    cap = config.convergence_cap
    steady_at = None
    rows, grids = [], []
    if config.dump_grids:
        grids.append((0, prev.to_text()))
    steps = 0
    while steps < config.t_final:
        before = sim.time(level).t
        kernel.step(sim)
        if sim.time(level).t == before:
            continue
        steps += 1
        sigma = sim.level_states[level].sigma
        grid = sigma.grid
        row = TimeSeriesRow(replication, steps, grid.density())
        if "cluster_stats" in metrics:
            row.cluster_mean, row.cluster_var = cluster_stats(grid, config.region_size)
        if "rejected_rate" in metrics:
            row.r = rejected_rate(sigma.vetoed, grid.size)
        if "changed_cells" in metrics:
            row.changed = changed_cells(prev, grid)
        rows.append(row)
        if config.dump_grids:
            grids.append((steps, grid.to_text()))
        if steady_at is None and cap is not None and steps <= cap and detect_steady(prev, grid, sigma.vetoed):
            steady_at = steps
            if config.stop_on_steady:
                break
        prev = grid
    final = sim.level_states[level].sigma.grid
    converged = steady_at is not None
    report = ConvergenceReport(replication, converged, steady_at if converged else (cap or config.t_final),
                               final.density())
    return ReplicationResult(rows, report, grids)


def _run_one(args):
    return run_replication(*args)


def run_replications(config: ExperimentConfig, workers: int | None = None) -> list:
    workers = config.workers if workers is None else workers
    jobs = [(config, k) for k in range(config.replications)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return sorted(results, key=lambda r: r.report.replication)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6g}"


def summarize(rows) -> list[dict]:
    """Per-step mean and population variance of every metric, across replications."""
    by_step: dict[int, list] = {}
    for row in rows:
        by_step.setdefault(row.step, []).append(row)
    out = []
    for step in sorted(by_step):
        group = by_step[step]
        entry = {"step": step, "n": len(group)}
        for name in SUMMARY_METRICS:
            vals = [getattr(r, name) for r in group if getattr(r, name) is not None]
            if vals:
                arr = np.asarray(vals, dtype=np.float64)
                entry[f"{name}_mean"], entry[f"{name}_var"] = float(arr.mean()), float(arr.var())
            else:
                entry[f"{name}_mean"] = entry[f"{name}_var"] = None
        out.append(entry)
    return out


SUMMARY_COLUMNS = ("step", "n") + tuple(f"{m}_{s}" for m in SUMMARY_METRICS for s in ("mean", "var"))
CONVERGENCE_COLUMNS = ("replication", "converged", "steps_to_steady", "final_density")


def _write(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_outputs(result: ExperimentResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write(out_dir / "timeseries.csv", COLUMNS, (r.values() for r in result.rows))
    _write(out_dir / "convergence.csv", CONVERGENCE_COLUMNS,
           ((r.replication, r.converged, r.steps_to_steady, r.final_density) for r in result.reports))
    summary = summarize(result.rows)
    _write(out_dir / "summary.csv", SUMMARY_COLUMNS, ([s[c] for c in SUMMARY_COLUMNS] for s in summary))
    if result.config.dump_grids:
        grid_dir = out_dir / "grids"
        grid_dir.mkdir(exist_ok=True)
        for rep in result.replications:
            for step, text in rep.grids:
                (grid_dir / f"rep{rep.report.replication:03d}_step{step:06d}.txt").write_text(text)


def run_experiment(config: ExperimentConfig, out_dir=None, workers: int | None = None,
                   write: bool = True) -> ExperimentResult:
    out = Path(out_dir) if out_dir is not None else config.output_dir
    if write:
        out.mkdir(parents=True, exist_ok=True)
    log.info("running %s x%d, %d steps", config.model, config.replications, config.t_final)
    result = ExperimentResult(config, run_replications(config, workers), out if write else None)
    if write:
        write_outputs(result, out)
    return result


@dataclass
class SweepRow:
    lambda_plus: float
    p: float
    mean_steps: float
    converged: int
    replications: int


def lambda_grid(start: float, stop: float, step: float) -> list[float]:
    if step <= 0 or stop < start:
        raise ValueError("need step > 0 and stop >= start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(n)]


def sweep_lambda(config: ExperimentConfig, lambda_values, out_dir=None,
                 workers: int | None = None, write: bool = True) -> list[SweepRow]:
    """Mean steps to a still life for each lambda_plus; capped runs count at the cap."""
    if config.model != "life":
        raise ValueError("lambda sweeps apply to the life model")
    base = Path(out_dir) if out_dir is not None else config.output_dir
    table = []
    for lam in lambda_values:
        cfg = ExperimentConfig.from_mapping({**config.to_mapping(), "p": None, "lambda_plus": float(lam)})
        result = run_experiment(cfg, base / f"lambda_{lam:.4f}", workers, write)
        steps = [r.steps_to_steady for r in result.reports]
        table.append(SweepRow(float(lam), cfg.life_params().p, float(np.mean(steps)),
                              sum(r.converged for r in result.reports), len(steps)))
    if write:
        base.mkdir(parents=True, exist_ok=True)
        _write(base / "sweep.csv", ("lambda_plus", "p", "mean_steps", "converged", "replications"),
               ((s.lambda_plus, s.p, s.mean_steps, s.converged, s.replications) for s in table))
    return table
