"""Multi-level influence-reaction engine.

A simulation is a set of levels linked by an influence graph and a perception
graph.  Agents belong to zero or more levels; at each level they perceive,
the agent memorizes once, then decides influences for the levels it can reach.
Each level owns a reaction function that turns its environmental properties
and the influences it received into its next state and next time span.

Times are integer ticks.  ``step`` runs one iteration of the scheduler:
perception and memorization, influence production, then reaction of every
level whose ``t + dt`` is minimal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping

import numpy as np

from irsim.rng import uniform_field

LevelId = Hashable

INFLUENCE = "influence"
PERCEPTION = "perception"
ENVIRONMENT = "environment"


class ConfigurationError(ValueError):
    """Invalid level graph or simulation wiring."""


class ModelError(RuntimeError):
    """A model function broke the kernel contract."""


@dataclass(frozen=True)
class SimTime:
    t: int
    dt: int

    def __post_init__(self):
        if self.t < 0:
            raise ModelError(f"negative time t={self.t}")
        if self.dt < 1:
            raise ModelError(f"time span dt={self.dt} would stall the scheduler")

    @property
    def end(self) -> int:
        return self.t + self.dt

    def advance(self, dt: int | None = None) -> "SimTime":
        return SimTime(self.t + self.dt, self.dt if dt is None else dt)


@dataclass(frozen=True)
class LevelGraph:
    levels: frozenset
    influence_edges: frozenset = frozenset()
    perception_edges: frozenset = frozenset()

    def __init__(self, levels: Iterable, influence_edges: Iterable = (),
                 perception_edges: Iterable = ()):
        levels = frozenset(levels)
        # within-level relations are implicit, never stored
        ie = frozenset((a, b) for a, b in influence_edges if a != b)
        pe = frozenset((a, b) for a, b in perception_edges if a != b)
        for a, b in ie | pe:
            if a not in levels or b not in levels:
                raise ConfigurationError(f"edge ({a!r}, {b!r}) references an unknown level")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "influence_edges", ie)
        object.__setattr__(self, "perception_edges", pe)

    def _edges(self, relation: str) -> frozenset:
        if relation == INFLUENCE:
            return self.influence_edges
        if relation == PERCEPTION:
            return self.perception_edges
        raise ConfigurationError(f"unknown relation {relation!r}")

    def _check(self, level):
        if level not in self.levels:
            raise ConfigurationError(f"unknown level {level!r}")


def out_neighborhood(graph: LevelGraph, level, relation: str) -> frozenset:
    graph._check(level)
    return frozenset({level} | {b for a, b in graph._edges(relation) if a == level})


def in_neighborhood(graph: LevelGraph, level, relation: str) -> frozenset:
    graph._check(level)
    return frozenset({level} | {a for a, b in graph._edges(relation) if b == level})


@dataclass(frozen=True)
class Influence:
    source: Any
    origin_level: Any
    target_level: Any
    payload: Any


@dataclass
class LevelState:
    sigma: Any
    time: SimTime
    gamma: tuple = ()


@dataclass
class Reaction:
    """What a reaction function returns: next properties, retained influences, next time."""

    sigma: Any
    time: SimTime
    gamma: tuple = ()


@dataclass
class Behavior:
    """The level side of an agent.

    ``perceive(states, ctx)`` receives a mapping over the out perception
    neighborhood of the level.  ``decide(internal_state, targets, ctx)`` returns
    a mapping target level -> iterable of payloads, restricted to ``targets``.
    """

    perceive: Callable[[Mapping[Any, LevelState], "StepContext"], Any]
    decide: Callable[[Any, frozenset, "StepContext"], Mapping[Any, Iterable]]


@dataclass
class AgentRecord:
    id: Any
    internal_state: Any
    behaviors: dict
    memorize: Callable[[Mapping[Any, Any], Any, "StepContext"], Any]
    pending_percepts: dict = field(default_factory=dict)

    @property
    def levels(self) -> frozenset:
        return frozenset(self.behaviors)


@dataclass
class EnvironmentRecord:
    """``naturals[l](level_state, targets, ctx)`` returns target -> payloads."""

    id: Any
    naturals: dict


@dataclass
class LevelSpec:
    id: Any
    reaction: Callable[[Any, list, "StepContext"], Reaction]


@dataclass(frozen=True)
class StepContext:
    """Injected into every model function: who runs, at which tick, and its RNG key."""

    level: Any
    time: SimTime
    iteration: int
    seed: int
    replication: int

    def uniform(self, entities, tick: int | None = None) -> np.ndarray:
        """Counter-based uniform draws in [0, 1), one per entity index."""
        return uniform_field(self.seed, self.replication, self.level,
                             self.time.t if tick is None else tick, entities)


@dataclass
class TraceEvent:
    iteration: int
    times: dict
    perceiving: dict
    emitting: dict
    targets: dict
    reacting: tuple


@dataclass
class Simulation:
    graph: LevelGraph
    level_states: dict
    level_specs: dict
    agents: list = field(default_factory=list)
    environments: list = field(default_factory=list)
    t_final: int = 0
    seed: int = 0
    replication: int = 0
    pending_influences: dict = field(default_factory=dict)
    iteration: int = 0
    trace: list | None = None
    produced: int = 0
    consumed: int = 0
    _emitted: set = field(default_factory=set, repr=False)
    _perceived: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.graph.levels:
            raise ConfigurationError("empty level set")
        for l in self.graph.levels:
            if l not in self.level_states or l not in self.level_specs:
                raise ConfigurationError(f"level {l!r} lacks a state or a reaction")
            self.pending_influences.setdefault(l, [])
        for a in self.agents:
            for l in a.behaviors:
                self.graph._check(l)
        for env in self.environments:
            for l in env.naturals:
                self.graph._check(l)

    def time(self, level) -> SimTime:
        return self.level_states[level].time

    def context(self, level) -> StepContext:
        return StepContext(level, self.time(level), self.iteration, self.seed, self.replication)

    def members(self, level) -> list:
        return [a for a in self.agents if level in a.behaviors]


def can_perceive(sim: Simulation, level) -> bool:
    t = sim.time(level).t
    return all(t >= sim.time(lp).t for lp in out_neighborhood(sim.graph, level, PERCEPTION))


def can_emit_influences(sim: Simulation, level) -> bool:
    me = sim.time(level)
    for li in out_neighborhood(sim.graph, level, INFLUENCE):
        other = sim.time(li)
        if not (me.t <= other.t or me.end < other.end):
            return False
    return True


def influence_targets(sim: Simulation, level) -> frozenset:
    me = sim.time(level)
    return frozenset(
        li for li in out_neighborhood(sim.graph, level, INFLUENCE)
        if me.t <= sim.time(li).t < me.end
    )


def reaction_set(sim: Simulation) -> frozenset:
    if not sim.graph.levels:
        raise ConfigurationError("empty level set")
    ends = {l: sim.time(l).end for l in sim.graph.levels}
    first = min(ends.values())
    return frozenset(l for l, e in ends.items() if e == first)


def aggregate_influences(sim: Simulation, level) -> list:
    state = sim.level_states[level]
    sources = in_neighborhood(sim.graph, level, INFLUENCE)
    pending = [i for i in sim.pending_influences.get(level, ())
               if i.target_level == level and i.origin_level in sources]
    return list(state.gamma) + pending


def _ordered(levels) -> list:
    # deterministic order for sets of arbitrary hashables
    return sorted(levels, key=repr)


def _collect(sim: Simulation, origin, source, produced: Mapping, targets: frozenset):
    for target, payloads in produced.items():
        if target not in targets:
            raise ModelError(f"{source!r} in level {origin!r} influenced uncovered level {target!r}")
        for payload in payloads:
            sim.pending_influences[target].append(Influence(source, origin, target, payload))
            sim.produced += 1


def step(sim: Simulation) -> Simulation:
    """One scheduler iteration; mutates and returns ``sim``."""
    levels = _ordered(sim.graph.levels)
    times = {l: sim.time(l) for l in levels}
    perceiving = {l: can_perceive(sim, l) for l in levels}

    # phase 1: perception, then a single memorization per agent
    for agent in sim.agents:
        fresh = {}
        for l in _ordered(agent.behaviors):
            if not perceiving[l]:
                continue
            scope = out_neighborhood(sim.graph, l, PERCEPTION)
            key = tuple((lp, times[lp].t) for lp in _ordered(scope))
            if sim._perceived.get((agent.id, l)) == key:
                continue
            sim._perceived[(agent.id, l)] = key
            states = {lp: sim.level_states[lp] for lp in scope}
            fresh[l] = agent.behaviors[l].perceive(states, sim.context(l))
        if fresh:
            agent.pending_percepts.update(fresh)
            agent.internal_state = agent.memorize(fresh, agent.internal_state, sim.context(_ordered(fresh)[0]))

    # phase 2: influence production into covered events
    emitting = {l: can_emit_influences(sim, l) for l in levels}
    targets_of = {}
    for l in levels:
        if not emitting[l]:
            continue
        covered = influence_targets(sim, l)
        targets_of[l] = covered
        # an event is influenced at most once by a given event of l
        targets = frozenset(li for li in covered if (l, times[l].t, li, times[li].t) not in sim._emitted)
        if not targets:
            continue
        for li in targets:
            sim._emitted.add((l, times[l].t, li, times[li].t))
        ctx = sim.context(l)
        for env in sim.environments:
            natural = env.naturals.get(l)
            if natural is not None:
                _collect(sim, l, (ENVIRONMENT, env.id), natural(sim.level_states[l], targets, ctx), targets)
        for agent in sim.agents:
            behavior = agent.behaviors.get(l)
            if behavior is not None:
                _collect(sim, l, agent.id, behavior.decide(agent.internal_state, targets, ctx), targets)

    # phase 3: reactions
    reacting = reaction_set(sim)
    results = {}
    for l in _ordered(reacting):
        influences = aggregate_influences(sim, l)
        result = sim.level_specs[l].reaction(sim.level_states[l].sigma, influences, sim.context(l))
        if not isinstance(result.time, SimTime) or result.time.dt < 1:
            raise ModelError(f"reaction of level {l!r} returned an invalid time {result.time!r}")
        if result.time.t <= times[l].t:
            raise ModelError(f"reaction of level {l!r} did not advance time")
        if any(i.target_level != l for i in result.gamma):
            raise ModelError(f"level {l!r} retained influences aimed at another level")
        results[l] = result
    for l, result in results.items():
        consumed = len(sim.pending_influences[l])
        sim.consumed += consumed
        sim.pending_influences[l] = []
        sim.level_states[l] = LevelState(result.sigma, result.time, tuple(result.gamma))

    if sim.trace is not None:
        sim.trace.append(TraceEvent(
            sim.iteration, {l: (times[l].t, times[l].dt) for l in levels},
            perceiving, emitting, targets_of, tuple(_ordered(reacting)),
        ))
    sim.iteration += 1
    return sim


def active(sim: Simulation, t_final: int) -> bool:
    return any(sim.time(l).t <= t_final for l in sim.graph.levels)


def run(sim: Simulation, t_final: int | None = None) -> dict:
    """Step until every level clock is past ``t_final``; return the final level states."""
    if t_final is None:
        t_final = sim.t_final
    sim.t_final = t_final
    while active(sim, t_final):
        step(sim)
    return dict(sim.level_states)
