from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from irsim.life import CellGrid
from irsim.rng import RngStream

COLUMNS = ("replication", "step", "rho", "cluster_mean", "cluster_var", "r", "changed")


@dataclass
class TimeSeriesRow:
    replication: int
    step: int
    rho: float
    cluster_mean: float | None = None
    cluster_var: float | None = None
    r: float | None = None
    changed: int | None = None

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in COLUMNS)


@dataclass
class ConvergenceReport:
    replication: int
    converged: bool
    steps_to_steady: int
    final_density: float


def init_random_grid(width: int, height: int, density: float, stream: RngStream) -> CellGrid:
    """Each cell alive independently with probability ``density``."""
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density={density} outside [0, 1]")
    draws = stream.uniform(width * height)
    return CellGrid((draws < density).reshape(height, width))


def detect_steady(prev: CellGrid, cur: CellGrid, rejected: int = 0) -> bool:
    """Still life: identical consecutive grids reached without any vetoed death."""
    if prev.alive.shape != cur.alive.shape:
        raise ValueError(f"grid shapes differ: {prev.alive.shape} vs {cur.alive.shape}")
    return rejected == 0 and np.array_equal(prev.alive, cur.alive)


def cluster_stats(grid: CellGrid, region_size: int) -> tuple[float, float]:
    """Mean and population variance of the densities of all r x r regions."""
    r = region_size
    if r < 1 or grid.width % r or grid.height % r:
        raise ValueError(f"{grid.width}x{grid.height} grid is not tiled by {r}x{r} regions")
    dens = grid.alive.reshape(grid.height // r, r, grid.width // r, r).mean(axis=(1, 3))
    return float(dens.mean()), float(dens.var())


def changed_cells(prev: CellGrid, cur: CellGrid) -> int:
    return int(np.count_nonzero(prev.alive != cur.alive))
