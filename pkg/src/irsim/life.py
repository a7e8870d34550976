"""Agent-based Game of Life with a death-veto probability in the reaction.

Each cell is an agent that perceives its live-neighbour count, memorizes its
next state under B3/S23 and emits that state as its influence.  The reaction
applies influences, except that a dying cell is kept alive with probability
``p``.  Raising ``p`` raises Langton's lambda of the effective rule:
``lambda_plus = lambda_life + (172/512) * p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import comb
from typing import Callable, Iterable

import numpy as np

from irsim import kernel
from irsim.kernel import (
    AgentRecord, Behavior, ConfigurationError, EnvironmentRecord, Influence,
    LevelGraph, LevelSpec, LevelState, ModelError, Reaction, SimTime, Simulation,
)

LEVEL = "cells"

# configurations (of 2*256) that do not depend on p, and the p-sensitive ones
_DEAD_WITH_TWO = comb(8, 2)
_DYING_COUNTS = (0, 1, 4, 5, 6, 7, 8)
_DYING_SUM = sum(comb(8, i) for i in _DYING_COUNTS)  # 172
RULE_SIZE = 2 ** 9
SLOPE = Fraction(_DYING_SUM, RULE_SIZE)  # 0.3359375
LAMBDA_LIFE = 0.2734375
LAMBDA_MAX = 0.609375


@dataclass(eq=False)
class CellGrid:
    """Toroidal boolean grid, shape (height, width), row-major cell indices."""

    alive: np.ndarray

    def __post_init__(self):
        self.alive = np.asarray(self.alive, dtype=bool)
        if self.alive.ndim != 2 or 0 in self.alive.shape:
            raise ConfigurationError(f"grid must be a non-empty 2-d array, got shape {self.alive.shape}")

    @classmethod
    def empty(cls, width: int, height: int) -> "CellGrid":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_cells(cls, width: int, height: int, cells: Iterable[tuple[int, int]]) -> "CellGrid":
        g = cls.empty(width, height)
        for row, col in cells:
            g.alive[row % height, col % width] = True
        return g

    @classmethod
    def from_text(cls, text: str) -> "CellGrid":
        rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
        return cls(np.array([[ch == "#" for ch in row] for row in rows], dtype=bool))

    def to_text(self) -> str:
        return "\n".join("".join("#" if v else "." for v in row) for row in self.alive) + "\n"

    @property
    def height(self) -> int:
        return self.alive.shape[0]

    @property
    def width(self) -> int:
        return self.alive.shape[1]

    @property
    def size(self) -> int:
        return self.alive.size

    def alive_count(self) -> int:
        return int(np.count_nonzero(self.alive))

    def density(self) -> float:
        return self.alive_count() / self.size

    def copy(self) -> "CellGrid":
        return CellGrid(self.alive.copy())

    def __eq__(self, other):
        return isinstance(other, CellGrid) and np.array_equal(self.alive, other.alive)


def neighbor_counts(alive: np.ndarray) -> np.ndarray:
    """Live-neighbour count of every cell on the torus (own state excluded)."""
    a = np.pad(alive.view(np.uint8), 1, mode="wrap")
    h, w = alive.shape
    return (a[:h, :w] + a[:h, 1:w + 1] + a[:h, 2:]
            + a[1:h + 1, :w] + a[1:h + 1, 2:]
            + a[2:, :w] + a[2:, 1:w + 1] + a[2:, 2:])


def life_rule(counts: np.ndarray, alive: np.ndarray) -> np.ndarray:
    return (counts == 3) | (alive & (counts == 2))


def life_step(alive: np.ndarray) -> np.ndarray:
    return life_rule(neighbor_counts(alive), alive)


def perception_cell(grid: CellGrid, cell: int) -> int:
    row, col = divmod(cell, grid.width)
    total = 0
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr or dc:
                total += bool(grid.alive[(row + dr) % grid.height, (col + dc) % grid.width])
    return total


def memorization_cell(neighbor_count: int, currently_alive: bool) -> bool:
    if not 0 <= neighbor_count <= 8:
        raise ValueError(f"neighbour count {neighbor_count} outside [0, 8]")
    return bool((currently_alive and neighbor_count in (2, 3))
                or (not currently_alive and neighbor_count == 3))


@dataclass(frozen=True)
class CellInfluence:
    cell: int
    next_alive: bool


@dataclass(frozen=True, eq=False)
class CellInfluenceField:
    """Influences of a whole population of cells at once, indexed by cell."""

    next_alive: np.ndarray


def decision_cell(next_state: bool, cell: int = 0) -> CellInfluence:
    return CellInfluence(cell, bool(next_state))


def gather_next_states(influences: Iterable, n_cells: int) -> np.ndarray:
    """Turn a bag of cell influences into one next-state array; other payloads are ignored."""
    next_alive = np.zeros(n_cells, dtype=bool)
    seen = np.zeros(n_cells, dtype=np.int64)
    for infl in influences:
        payload = infl.payload if isinstance(infl, Influence) else infl
        if isinstance(payload, CellInfluenceField):
            arr = np.asarray(payload.next_alive, dtype=bool).ravel()
            if arr.size != n_cells:
                raise ModelError(f"influence field covers {arr.size} cells, grid has {n_cells}")
            next_alive |= arr
            seen += 1
        elif isinstance(payload, CellInfluence):
            next_alive[payload.cell] = payload.next_alive
            seen[payload.cell] += 1
    if (seen == 0).any():
        raise ModelError(f"no influence for cell {int(np.argmin(seen))}")
    if (seen > 1).any():
        raise ModelError(f"several influences for cell {int(np.argmax(seen))}")
    return next_alive


def dying_cells(alive: np.ndarray, next_alive: np.ndarray) -> np.ndarray:
    """Flat indices of cells that are alive and influenced to die."""
    return np.flatnonzero(alive.ravel() & ~next_alive.ravel())


def reaction_life(grid: CellGrid, influences, p: float,
                  draw: Callable[[np.ndarray], np.ndarray]) -> tuple[CellGrid, int]:
    """Apply cell influences, vetoing each death with probability ``p``.

    ``influences`` is either a next-state array or a bag of cell influences.
    ``draw(cells)`` gives one uniform in [0, 1) per dying cell from that cell's
    own stream.  Returns the new grid and the number of vetoed deaths.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if isinstance(influences, np.ndarray):
        next_alive = influences.astype(bool).ravel()
        if next_alive.size != grid.size:
            raise ModelError("influence array does not match the grid")
    else:
        next_alive = gather_next_states(influences, grid.size)
    new = next_alive.copy()
    dying = dying_cells(grid.alive, next_alive)
    vetoed = 0
    if p > 0 and dying.size:
        rescued = dying[draw(dying) < p]
        new[rescued] = True
        vetoed = int(rescued.size)
    return CellGrid(new.reshape(grid.alive.shape)), vetoed


def lambda_langton(K: int, N: int, n: int) -> float:
    if K < 2 or N < 1:
        raise ValueError("need K >= 2 and N >= 1")
    total = K ** N
    if not 0 <= n <= total:
        raise ValueError(f"n={n} outside [0, {total}]")
    return 1 - n / total


def enumerate_quiescent_transitions() -> int:
    """Count, by brute force over all 512 neighbourhoods, Life transitions to the dead state."""
    count = 0
    for bits in product((0, 1), repeat=9):
        centre, neighbours = bits[4], bits[:4] + bits[5:]
        if not memorization_cell(sum(neighbours), bool(centre)):
            count += 1
    return count


def count_quiescent_transitions(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    return _DEAD_WITH_TWO + (2 - p) * _DYING_SUM


def lambda_of_p(p: float) -> float:
    return lambda_langton(2, 9, 0) - count_quiescent_transitions(p) / RULE_SIZE


def p_of_lambda(lambda_plus: float, saturate: bool = False) -> float:
    """Veto probability giving ``lambda_plus``.

    With ``saturate`` a target above the reachable maximum maps to p = 1
    (every death vetoed) instead of raising.
    """
    upper = 1.0 if saturate else LAMBDA_MAX
    if not LAMBDA_LIFE - 1e-12 <= lambda_plus <= upper + 1e-12:
        raise ValueError(f"lambda_plus={lambda_plus} outside [{LAMBDA_LIFE}, {LAMBDA_MAX}]")
    return min(1.0, max(0.0, (lambda_plus - LAMBDA_LIFE) / float(SLOPE)))


@dataclass(frozen=True)
class LifeParams:
    p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")

    @classmethod
    def from_lambda(cls, lambda_plus: float, saturate: bool = False) -> "LifeParams":
        return cls(p_of_lambda(lambda_plus, saturate))

    @property
    def lambda_plus(self) -> float:
        return lambda_of_p(self.p)


@dataclass
class LifeSigma:
    """Environmental properties of the cell level plus bookkeeping of the last reaction."""

    grid: CellGrid
    vetoed: int = 0
    dying: int = 0
    commands: np.ndarray | None = None


# population agent: one record whose arrays hold every cell's state

def _population_perceive(level):
    def perceive(states, ctx):
        grid = states[level].sigma.grid
        return neighbor_counts(grid.alive), grid.alive
    return perceive


def _population_memorize(level):
    def memorize(percepts, state, ctx):
        counts, alive = percepts[level]
        return life_rule(counts, alive)
    return memorize


def _population_decide(level):
    def decide(state, targets, ctx):
        return {level: [CellInfluenceField(state.ravel())]}
    return decide


def cell_population(level=LEVEL, agent_id="cells") -> AgentRecord:
    """All cells of ``level`` as one vectorised agent record."""
    return AgentRecord(
        id=agent_id,
        internal_state=None,
        behaviors={level: Behavior(_population_perceive(level), _population_decide(level))},
        memorize=_population_memorize(level),
    )


def cell_agents(grid: CellGrid, level=LEVEL) -> list[AgentRecord]:
    """One agent record per cell, in row-major order."""
    agents = []
    for cell in range(grid.size):
        def perceive(states, ctx, cell=cell):
            g = states[level].sigma.grid
            return perception_cell(g, cell), bool(g.alive.flat[cell])

        def memorize(percepts, state, ctx):
            count, alive = percepts[level]
            return memorization_cell(count, alive)

        def decide(state, targets, ctx, cell=cell):
            return {level: [decision_cell(state, cell)]}

        agents.append(AgentRecord(("cell", cell), False, {level: Behavior(perceive, decide)}, memorize))
    return agents


def life_reaction(p: float):
    def reaction(sigma: LifeSigma, influences, ctx):
        next_alive = gather_next_states(influences, sigma.grid.size)
        grid, vetoed = reaction_life(sigma.grid, next_alive, p, ctx.uniform)
        dying = int(dying_cells(sigma.grid.alive, next_alive).size)
        return Reaction(LifeSigma(grid, vetoed, dying), ctx.time.advance())
    return reaction


def static_environment(level=LEVEL) -> EnvironmentRecord:
    return EnvironmentRecord("omega", {level: lambda state, targets, ctx: {}})


def build_life_simulation(params: LifeParams, grid: CellGrid, *, seed: int = 0,
                          replication: int = 0, per_cell: bool = False,
                          t_final: int = 0) -> Simulation:
    """Mono-level Life model on the kernel.

    ``per_cell`` wires one agent record per cell; the default wires the same
    behaviours as a single vectorised population record.
    """
    if grid.size == 0:
        raise ConfigurationError("zero-size grid")
    agents = cell_agents(grid) if per_cell else [cell_population()]
    return Simulation(
        graph=LevelGraph([LEVEL]),
        level_states={LEVEL: LevelState(LifeSigma(grid.copy()), SimTime(0, 1))},
        level_specs={LEVEL: LevelSpec(LEVEL, life_reaction(params.p))},
        agents=agents,
        environments=[static_environment()],
        t_final=t_final,
        seed=seed,
        replication=replication,
    )


def current_grid(sim: Simulation, level=LEVEL) -> CellGrid:
    return sim.level_states[level].sigma.grid


def advance(sim: Simulation, steps: int = 1) -> Simulation:
    for _ in range(steps):
        kernel.step(sim)
    return sim
