"""Strategies for instances without fixed destinations, and the one-tree baseline.

A: plan with open-ended sequences directly.
B: pin each agent's destination to a task, then plan as a fixed-destination instance.
C: A on a share of the budget, B on the rest if A runs out of time.
SCBS: a single constraint tree over the cheapest joint sequence.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

from .search import INFEASIBLE, TIMEOUT, CTSCBS, SolverConfig, SolveResult
from .sequencing import OPEN, SingleAgentKBest, build_cost_matrix
from .world import CTS, MG, DistanceMaps, Instance, shortest_distances

VARIANTS = ("base", "A", "B", "C", "SCBS")


@dataclass
class AdaptationConfig:
    variant: str = "A"
    base: SolverConfig = field(default_factory=SolverConfig)
    c_split: float = 2 / 3

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0 < self.c_split < 1:
            raise ValueError(f"c_split must lie in (0, 1), got {self.c_split}")


def _require_mg(instance: Instance):
    if instance.mode != MG:
        raise ValueError("this strategy needs an instance without fixed destinations")


def _run(instance, config, variant, terminal=None):
    if terminal is not None:
        config = dataclasses.replace(config, terminal=terminal)
    result = CTSCBS(instance, config).solve()
    result.variant = variant
    return result


def solve_mg_a(instance: Instance, config: SolverConfig | None = None) -> SolveResult:
    _require_mg(instance)
    return _run(instance, config or SolverConfig(), "CTS-CBS-A", OPEN)


def choose_destinations(instance: Instance, distances: DistanceMaps | None = None):
    """Map agent id to the final task vertex of its best open-ended sequence.

    Agents are handled in id order; a later agent whose choice is taken
    walks down its ranking to the next sequence ending elsewhere. Returns
    None when some agent has no free option left.
    """
    _require_mg(instance)
    for a in instance.agents:
        if not instance.tasks_of(a.id):
            raise ValueError(f"agent {a.id} has no assigned task to use as a destination")
    table = shortest_distances(instance.map, instance.key_vertices(), distances)
    taken = set()
    dests = {}
    for a in instance.agents:
        ranker = SingleAgentKBest(build_cost_matrix(instance, a.id, table, OPEN))
        k = 1
        while True:
            seq = ranker.get(k)
            if seq is None or seq.cost == math.inf:
                return None
            end = tuple(seq.targets[-1])
            if end not in taken:
                break
            k += 1
        taken.add(end)
        dests[a.id] = end
    return dests


def solve_mg_b(instance: Instance, config: SolverConfig | None = None) -> SolveResult:
    config = config or SolverConfig()
    t0 = time.perf_counter()
    dests = choose_destinations(instance)
    if dests is None:
        result = SolveResult(INFEASIBLE, variant="CTS-CBS-B")
        result.stats.runtime = time.perf_counter() - t0
        return result
    spent = time.perf_counter() - t0
    remaining = config.time_limit - spent
    if remaining <= 0:
        result = SolveResult(TIMEOUT, variant="CTS-CBS-B")
        result.stats.runtime = spent
        return result
    fixed = instance.with_destinations(dests)
    result = _run(fixed, dataclasses.replace(config, time_limit=remaining, terminal=None), "CTS-CBS-B")
    result.stats.runtime += spent
    return result


def solve_mg_c(instance: Instance, config: SolverConfig | None = None,
               c_split: float = 2 / 3) -> SolveResult:
    config = config or SolverConfig()
    _require_mg(instance)
    budget = config.time_limit
    first = solve_mg_a(instance, dataclasses.replace(config, time_limit=c_split * budget))
    first.variant = "CTS-CBS-C"
    first.phase = "A"
    if first.status != TIMEOUT:
        return first
    second = solve_mg_b(instance, dataclasses.replace(config, time_limit=budget - first.stats.runtime))
    second.variant = "CTS-CBS-C"
    second.phase = "B"
    second.stats.runtime += first.stats.runtime
    return second


def solve_sequential(instance: Instance, config: SolverConfig | None = None) -> SolveResult:
    config = dataclasses.replace(config or SolverConfig(), omega=math.inf)
    return _run(instance, config, "S-CBS")


def solve_variant(instance: Instance, config: AdaptationConfig) -> SolveResult:
    """Dispatch on ``config.variant``; ``base`` is the plain forest search."""
    v = config.variant
    if v == "base":
        return _run(instance, config.base, "CTS-CBS")
    if v == "A":
        return solve_mg_a(instance, config.base)
    if v == "B":
        return solve_mg_b(instance, config.base)
    if v == "C":
        return solve_mg_c(instance, config.base, config.c_split)
    return solve_sequential(instance, config.base)
