"""Constrained multi-goal single-agent planning on safe intervals.

Search states are ``(vertex, safe interval, stage)`` where ``stage`` counts
the targets already reached in order. A goal state is the final target at
full stage inside an interval that never closes, so the agent may stay put
forever afterwards.
"""
from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .sequencing import TaskSequence
from .world import INF, DistanceMaps, GridMap

FOREVER = 1 << 60
VERTEX = "vertex"
EDGE = "edge"


class Constraint(NamedTuple):
    agent: int
    kind: str
    t: int
    u: tuple
    v: tuple | None = None   # edge target; None for vertex constraints

    @classmethod
    def vertex(cls, agent, v, t):
        return cls(agent, VERTEX, t, tuple(v))

    @classmethod
    def edge(cls, agent, u, v, t):
        return cls(agent, EDGE, t, tuple(u), tuple(v))


def _check(c: Constraint):
    if c.t < 0:
        raise ValueError(f"constraint time must be >= 0: {c}")
    if c.kind == EDGE:
        if c.v is None or abs(c.u[0] - c.v[0]) + abs(c.u[1] - c.v[1]) > 1:
            raise ValueError(f"edge constraint endpoints must be neighbours or equal: {c}")
    elif c.kind != VERTEX:
        raise ValueError(f"unknown constraint kind {c.kind!r}")


class ConstraintSet:
    """Immutable per-agent constraint store; ``add`` returns a new set."""

    __slots__ = ("_by_agent",)

    def __init__(self, constraints: Iterable[Constraint] = ()):
        by_agent: dict = {}
        for c in constraints:
            _check(c)
            by_agent.setdefault(c.agent, set()).add(c)
        self._by_agent = {a: frozenset(s) for a, s in by_agent.items()}

    def add(self, c: Constraint) -> "ConstraintSet":
        _check(c)
        new = ConstraintSet.__new__(ConstraintSet)
        new._by_agent = dict(self._by_agent)
        new._by_agent[c.agent] = self._by_agent.get(c.agent, frozenset()) | {c}
        return new

    def for_agent(self, agent: int) -> frozenset:
        return self._by_agent.get(agent, frozenset())

    def __contains__(self, c) -> bool:
        return c in self.for_agent(c.agent)

    def __iter__(self):
        for a in sorted(self._by_agent):
            yield from sorted(self._by_agent[a])

    def __len__(self):
        return sum(len(s) for s in self._by_agent.values())

    def issubset(self, other: "ConstraintSet") -> bool:
        return all(s <= other.for_agent(a) for a, s in self._by_agent.items())

    def __eq__(self, other):
        return isinstance(other, ConstraintSet) and set(self) == set(other)

    def __repr__(self):
        return f"ConstraintSet({list(self)!r})"


class SafeIntervalIndex:
    """Maximal constraint-free time windows per vertex, plus forbidden moves."""

    def __init__(self, vertex_times: dict, edge_times: dict):
        self.vertex_times = {v: sorted(ts) for v, ts in vertex_times.items()}
        self.edge_times = edge_times
        self._cache: dict = {}

    def intervals(self, v) -> list[tuple[int, int]]:
        """Sorted disjoint ``(lo, hi)`` windows; ``hi == FOREVER`` means open-ended."""
        v = tuple(v)
        iv = self._cache.get(v)
        if iv is not None:
            return iv
        iv = []
        lo = 0
        for t in self.vertex_times.get(v, ()):
            if t > lo:
                iv.append((lo, t - 1))
            lo = max(lo, t + 1)
        iv.append((lo, FOREVER))
        # a forbidden wait v->v at t splits the window between t-1 and t
        waits = sorted(self.edge_times.get((v, v), ()))
        if waits:
            split = []
            for a, b in iv:
                for t in waits:
                    if a < t <= b:
                        split.append((a, t - 1))
                        a = t
                split.append((a, b))
            iv = split
        self._cache[v] = iv
        return iv

    def blocked_move(self, u, v, t) -> bool:
        ts = self.edge_times.get((u, v))
        return ts is not None and t in ts

    def has_vertex_constraint_after(self, v, t) -> bool:
        ts = self.vertex_times.get(tuple(v), ())
        return bool(ts) and ts[-1] >= t


def build_safe_intervals(constraints, agent_id: int) -> SafeIntervalIndex:
    cons = constraints.for_agent(agent_id) if isinstance(constraints, ConstraintSet) else \
        [c for c in constraints if c.agent == agent_id]
    vertex_times: dict = {}
    edge_times: dict = {}
    for c in cons:
        if c.kind == VERTEX:
            vertex_times.setdefault(c.u, set()).add(c.t)
        else:
            edge_times.setdefault((c.u, c.v), set()).add(c.t)
    return SafeIntervalIndex(vertex_times, edge_times)


@dataclass(frozen=True)
class TimedPath:
    agent_id: int
    vertices: tuple
    visit_times: tuple = ()          # arrival time of each sequence target
    visits: tuple = ()               # (task_id, t) for task targets in order
    cost: int = field(default=-1)

    def __post_init__(self):
        if self.cost < 0:
            object.__setattr__(self, "cost", path_cost(self))

    def at(self, t: int):
        return self.vertices[t] if t < len(self.vertices) else self.vertices[-1]

    def __len__(self):
        return len(self.vertices)


def path_cost(path) -> int:
    """Time of arrival at the final vertex after which the agent never moves."""
    verts = path.vertices if isinstance(path, TimedPath) else path
    end = len(verts) - 1
    while end > 0 and verts[end - 1] == verts[end]:
        end -= 1
    return end


def _advance(stage: int, v, targets) -> int:
    last = len(targets) - 1
    while stage < last and targets[stage + 1] == v:
        stage += 1
    return stage


def low_level_search(grid: GridMap, sequence: TaskSequence, constraints=ConstraintSet(),
                     cost_cap=INF, distances: DistanceMaps | None = None,
                     agent_id: int | None = None) -> TimedPath | None:
    """Minimum-cost timed path through ``sequence.targets`` in order.

    Returns None if no path exists within ``cost_cap``.
    """
    targets = tuple(tuple(t) for t in sequence.targets)
    if not targets:
        raise ValueError("empty target sequence")
    agent = sequence.agent_id if agent_id is None else agent_id
    start = targets[0]
    if not grid.passable(start):
        raise ValueError(f"start {start} is blocked or out of bounds")
    for t in targets:
        if not grid.passable(t):
            return None
    dist = distances or DistanceMaps(grid)
    last = len(targets) - 1
    suffix = [0] * (last + 1)
    for s in range(last - 1, -1, -1):
        leg = dist(targets[s], targets[s + 1])
        suffix[s] = suffix[s + 1] + leg
    if suffix[0] == INF:
        return None
    fields = [dist.field(targets[s]) for s in range(last + 1)]

    def h(v, stage):
        if stage == last:
            return fields[last].get(v, INF)
        return fields[stage + 1].get(v, INF) + suffix[stage + 1]

    si = build_safe_intervals(constraints, agent)
    constrained = set(si.vertex_times) | {u for (u, w) in si.edge_times if u == w}
    free = [(0, FOREVER)]

    def intervals(v):
        return si.intervals(v) if v in constrained else free

    edge_times = si.edge_times
    final = targets[last]
    # target that advances the stage from each stage
    nxt = [targets[k + 1] if k < last else None for k in range(last + 1)]
    start_iv = intervals(start)
    if start_iv[0][0] != 0:
        return None
    stage0 = _advance(0, start, targets)
    s0 = (start, 0, stage0)
    best = {s0: 0}
    parent = {s0: None}
    h0 = h(start, stage0)
    if h0 > cost_cap:
        return None
    tick = 0
    heap = [(h0, 0, tick, s0)]   # ties on f go to the later (deeper) state
    goal = None
    neighbors = grid.neighbors
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        f, g, _, state = pop(heap)
        g = -g
        if g > best[state]:
            continue
        v, ivx, stage = state
        hi_v = intervals(v)[ivx][1]
        if stage == last and v == final and hi_v == FOREVER:
            goal = state
            break
        for u in neighbors(v):
            nstage = stage
            if u == nxt[stage]:
                nstage = _advance(stage, u, targets)
            hu = h(u, nstage)
            if hu == INF:
                continue
            moves = edge_times.get((v, u)) if edge_times else None
            for k, (lo_u, hi_u) in enumerate(intervals(u)):
                if lo_u > hi_v + 1:
                    break
                t = g + 1 if g + 1 > lo_u else lo_u
                latest = min(hi_v + 1, hi_u)
                if moves:
                    while t <= latest and t in moves:
                        t += 1
                if t > latest or t + hu > cost_cap:
                    continue
                ns = (u, k, nstage)
                if t < best.get(ns, FOREVER):
                    best[ns] = t
                    parent[ns] = (state, g)
                    tick += 1
                    push(heap, (t + hu, -t, tick, ns))
    if goal is None:
        return None

    chain = []
    s = goal
    while s is not None:
        chain.append((s, best[s]))
        p = parent[s]
        s = p[0] if p is not None else None
    chain.reverse()
    verts = [start]
    visit_times = [0] * (last + 1)
    for s in range(1, stage0 + 1):
        visit_times[s] = 0
    prev_stage = stage0
    for (state, t) in chain[1:]:
        v = state[0]
        while len(verts) < t:
            verts.append(verts[-1])
        verts.append(v)
        for s in range(prev_stage + 1, state[2] + 1):
            visit_times[s] = t
        prev_stage = state[2]
    task_ids = sequence.task_ids or (None,) * len(targets)
    visits = tuple((tid, visit_times[s]) for s, tid in enumerate(task_ids) if tid is not None)
    return TimedPath(agent, tuple(verts), tuple(visit_times), visits, len(verts) - 1)
