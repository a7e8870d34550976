"""Two-level Life: cells below, density controllers over r x r regions above.

The region level perceives the cell level and sends each cell a command
``k_p * (rho_plus - observed_density)``.  The cell-level reaction vetoes a
death when the command beats a uniform draw.  Births and survivals are
never touched, so the controller can only rescue, never kill.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from irsim.kernel import (
    AgentRecord, Behavior, ConfigurationError, EnvironmentRecord, Influence,
    LevelGraph, LevelSpec, LevelState, Reaction, SimTime, Simulation,
)
from irsim.life import (
    CellGrid, LifeSigma, cell_agents, cell_population, dying_cells,
    gather_next_states,
)

MICRO = "micro"
MESO = "meso"


@dataclass(eq=False)
class RegionPartition:
    width: int
    height: int
    region_size: int
    regions: list = field(init=False, repr=False)
    region_of: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        r = self.region_size
        if r < 1 or self.width % r or self.height % r:
            raise ConfigurationError(
                f"{self.width}x{self.height} grid cannot be tiled by {r}x{r} regions")
        rows, cols = np.divmod(np.arange(self.width * self.height), self.width)
        self.region_of = (rows // r) * (self.width // r) + cols // r
        self.regions = [np.flatnonzero(self.region_of == k) for k in range(self.n_regions)]

    @property
    def n_regions(self) -> int:
        return (self.width // self.region_size) * (self.height // self.region_size)

    def densities(self, alive: np.ndarray) -> np.ndarray:
        r = self.region_size
        blocks = alive.reshape(self.height // r, r, self.width // r, r)
        return blocks.mean(axis=(1, 3)).ravel()

    def spread(self, per_region: np.ndarray) -> np.ndarray:
        """Per-region values broadcast to a flat per-cell array."""
        return np.asarray(per_region, dtype=np.float64)[self.region_of]


@dataclass(frozen=True)
class ControlParams:
    rho_plus: float
    k_p: float | None = None

    def __post_init__(self):
        if not 0.0 < self.rho_plus < 1.0:
            raise ConfigurationError(f"rho_plus={self.rho_plus} outside (0, 1)")
        if self.k_p is None:
            object.__setattr__(self, "k_p", 10 * self.rho_plus)
        if self.k_p < 0:
            raise ConfigurationError(f"negative gain k_p={self.k_p}")


@dataclass
class MesoAgentState:
    region: int
    epsilon: float = 0.0
    command: float = 0.0


@dataclass(frozen=True)
class RegionCommand:
    region: int
    cells: np.ndarray
    value: float


@dataclass(frozen=True, eq=False)
class CommandField:
    """Per-cell commands for the whole grid (flat, row-major)."""

    values: np.ndarray


@dataclass
class MesoSigma:
    rho_plus: float
    partition: RegionPartition


def perception_meso(grid: CellGrid, region) -> float:
    cells = np.asarray(region)
    if cells.size == 0:
        raise ValueError("empty region")
    return float(grid.alive.ravel()[cells].mean())


def memorization_meso(observed_density: float, rho_plus: float) -> float:
    return rho_plus - observed_density


def decision_meso(epsilon: float, k_p: float, region, region_index: int = 0) -> RegionCommand:
    return RegionCommand(region_index, np.asarray(region), k_p * epsilon)


def gather_commands(influences: Iterable, n_cells: int) -> np.ndarray:
    """Per-cell command values; cells without a command get 0."""
    commands = np.zeros(n_cells)
    for infl in influences:
        payload = infl.payload if isinstance(infl, Influence) else infl
        if isinstance(payload, CommandField):
            commands = np.asarray(payload.values, dtype=np.float64).ravel().copy()
        elif isinstance(payload, RegionCommand):
            commands[payload.cells] = payload.value
    return commands


def reaction_micro_controlled(grid: CellGrid, influences, commands,
                              draw: Callable[[np.ndarray], np.ndarray]) -> tuple[CellGrid, int]:
    """Apply cell influences; a dying cell survives when its command beats a uniform draw.

    Returns the new grid and the number of rejected influences.
    """
    if isinstance(influences, np.ndarray):
        next_alive = influences.astype(bool).ravel()
    else:
        next_alive = gather_next_states(influences, grid.size)
    commands = np.asarray(commands, dtype=np.float64).ravel()
    new = next_alive.copy()
    dying = dying_cells(grid.alive, next_alive)
    rejected = 0
    # a non-positive command can never beat a draw in [0, 1)
    candidates = dying[commands[dying] > 0]
    if candidates.size:
        rescued = candidates[commands[candidates] > draw(candidates)]
        new[rescued] = True
        rejected = int(rescued.size)
    return CellGrid(new.reshape(grid.alive.shape)), rejected


def rejected_rate(rejected_count: int, total_influences: int) -> float:
    if total_influences <= 0:
        raise ValueError("no influences")
    return 100.0 * rejected_count / total_influences


def micro_reaction(sigma: LifeSigma, influences, ctx) -> Reaction:
    next_alive = gather_next_states(influences, sigma.grid.size)
    # commands are rebuilt from this event's influences only, never carried over
    commands = gather_commands(influences, sigma.grid.size)
    grid, rejected = reaction_micro_controlled(sigma.grid, next_alive, commands, ctx.uniform)
    dying = int(dying_cells(sigma.grid.alive, next_alive).size)
    return Reaction(LifeSigma(grid, rejected, dying, commands), ctx.time.advance())


def meso_reaction(sigma: MesoSigma, influences, ctx) -> Reaction:
    return Reaction(sigma, ctx.time.advance())


def meso_population(control: ControlParams) -> AgentRecord:
    """Every region controller as one vectorised record."""

    def perceive(states, ctx):
        partition = states[MESO].sigma.partition
        return partition.densities(states[MICRO].sigma.grid.alive), states[MESO].sigma

    def memorize(percepts, state, ctx):
        densities, meso = percepts[MESO]
        epsilon = memorization_meso(densities, meso.rho_plus)
        return {"epsilon": epsilon, "command": control.k_p * epsilon, "partition": meso.partition}

    def decide(state, targets, ctx):
        if state is None or MICRO not in targets:
            return {}
        return {MICRO: [CommandField(state["partition"].spread(state["command"]))]}

    return AgentRecord("controllers", None, {MESO: Behavior(perceive, decide)}, memorize)


def meso_agents(partition: RegionPartition, control: ControlParams) -> list[AgentRecord]:
    """One controller record per region."""
    agents = []
    for k, region in enumerate(partition.regions):
        def perceive(states, ctx, region=region):
            return perception_meso(states[MICRO].sigma.grid, region), states[MESO].sigma.rho_plus

        def memorize(percepts, state, ctx):
            observed, rho_plus = percepts[MESO]
            state.epsilon = memorization_meso(observed, rho_plus)
            state.command = control.k_p * state.epsilon
            return state

        def decide(state, targets, ctx, region=region):
            if MICRO not in targets:
                return {}
            return {MICRO: [decision_meso(state.epsilon, control.k_p, region, state.region)]}

        agents.append(AgentRecord(("region", k), MesoAgentState(k),
                                  {MESO: Behavior(perceive, decide)}, memorize))
    return agents


def build_mlife_simulation(grid: CellGrid, partition: RegionPartition, control: ControlParams, *,
                           seed: int = 0, replication: int = 0, meso_dt: int = 1,
                           per_cell: bool = False, per_region: bool = False,
                           t_final: int = 0) -> Simulation:
    if (partition.width, partition.height) != (grid.width, grid.height):
        raise ConfigurationError("partition does not match the grid")
    graph = LevelGraph([MICRO, MESO], influence_edges=[(MESO, MICRO)], perception_edges=[(MESO, MICRO)])
    cells = cell_agents(grid, MICRO) if per_cell else [cell_population(MICRO)]
    controllers = meso_agents(partition, control) if per_region else [meso_population(control)]
    return Simulation(
        graph=graph,
        level_states={
            MICRO: LevelState(LifeSigma(grid.copy(), commands=np.zeros(grid.size)), SimTime(0, 1)),
            MESO: LevelState(MesoSigma(control.rho_plus, partition), SimTime(0, meso_dt)),
        },
        level_specs={MICRO: LevelSpec(MICRO, micro_reaction), MESO: LevelSpec(MESO, meso_reaction)},
        agents=cells + controllers,
        environments=[EnvironmentRecord("omega", {MICRO: lambda s, t, c: {}, MESO: lambda s, t, c: {}})],
        t_final=t_final,
        seed=seed,
        replication=replication,
    )
