"""Exhaustive plan checker covering every constraint family of the problem."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from .pathing import TimedPath
from .world import CTS, Instance

BOUNDARY = "boundary"
TASK_COMPLETION = "task-completion"
TASK_ORDER = "task-order"
BEHAVIOR = "behavior"
STATIC_COLLISION = "static-collision"
VERTEX_CONFLICT = "vertex-conflict"
EDGE_CONFLICT = "edge-conflict"

KINDS = (BOUNDARY, TASK_COMPLETION, TASK_ORDER, BEHAVIOR, STATIC_COLLISION,
         VERTEX_CONFLICT, EDGE_CONFLICT)


@dataclass(frozen=True)
class Violation:
    kind: str
    agents: tuple
    t: int | None = None
    where: tuple | None = None       # vertex, or (u, v) edge
    task: int | None = None
    message: str = ""

    def __str__(self):
        return f"{self.kind}: {self.message}"


def _vertices(p):
    return tuple(tuple(v) for v in (p.vertices if isinstance(p, TimedPath) else p))


def validate_solution(instance: Instance, paths: Sequence, check_visits: bool = True) -> list[Violation]:
    """Every violation in ``paths`` (one per agent, in agent order).

    Raw vertex lists are checked for visits by location only; ``TimedPath``
    inputs also have their ``visits`` annotations checked when
    ``check_visits`` is set.
    """
    if len(paths) != instance.n_agents:
        raise ValueError(f"expected {instance.n_agents} paths, got {len(paths)}")
    grid = instance.map
    out: list[Violation] = []
    verts = [_vertices(p) for p in paths]

    for agent, p, vs in zip(instance.agents, paths, verts):
        i = agent.id
        if not vs:
            out.append(Violation(BOUNDARY, (i,), None, None, None, f"agent {i} has an empty path"))
            continue
        for t, v in enumerate(vs):
            if not grid.passable(v):
                why = "outside the map" if not grid.in_bounds(v) else "on an obstacle"
                out.append(Violation(STATIC_COLLISION, (i,), t, v, None, f"agent {i} at {v} {why} at t={t}"))
        for t in range(1, len(vs)):
            a, b = vs[t - 1], vs[t]
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) > 1:
                out.append(Violation(BEHAVIOR, (i,), t, (a, b), None,
                                     f"agent {i} jumps {a} -> {b} at t={t}"))
        if vs[0] != tuple(agent.start):
            out.append(Violation(BOUNDARY, (i,), 0, vs[0], None,
                                 f"agent {i} starts at {vs[0]}, expected {tuple(agent.start)}"))
        if instance.mode == CTS and vs[-1] != tuple(agent.destination):
            out.append(Violation(BOUNDARY, (i,), len(vs) - 1, vs[-1], None,
                                 f"agent {i} ends at {vs[-1]}, expected {tuple(agent.destination)}"))

        annotated = check_visits and isinstance(p, TimedPath)
        visits = {}
        if annotated:
            order = []
            for tid, t in p.visits:
                if tid in visits:
                    out.append(Violation(TASK_ORDER, (i,), t, None, tid, f"agent {i} records task {tid} twice"))
                visits[tid] = t
                order.append(t)
            for k in range(1, len(order)):
                if order[k] < order[k - 1]:
                    out.append(Violation(TASK_ORDER, (i,), order[k], None, p.visits[k][0],
                                         f"agent {i} visit times out of order at entry {k}"))
            assigned_ids = {t.id for t in instance.tasks_of(i)}
            for tid in sorted(set(visits) - assigned_ids):
                out.append(Violation(TASK_ORDER, (i,), visits[tid], None, tid,
                                     f"agent {i} records unassigned task {tid}"))
        seen = set(vs)
        for task in instance.tasks_of(i):
            loc = tuple(task.location)
            if loc not in seen:
                out.append(Violation(TASK_COMPLETION, (i,), None, loc, task.id,
                                     f"agent {i} never visits task {task.id} at {loc}"))
                continue
            if not annotated:
                continue
            t = visits.get(task.id)
            if t is None:
                out.append(Violation(TASK_COMPLETION, (i,), None, loc, task.id,
                                     f"agent {i} has no recorded visit of task {task.id}"))
            elif not (0 <= t < len(vs)) or vs[t] != loc:
                out.append(Violation(TASK_ORDER, (i,), t, loc, task.id,
                                     f"agent {i} is not at task {task.id} {loc} at recorded t={t}"))

    horizon = max((len(v) for v in verts if v), default=0)
    live = [(agent.id, vs) for agent, vs in zip(instance.agents, verts) if vs]

    def at(vs, t):
        return vs[t] if t < len(vs) else vs[-1]

    for (i, a), (j, b) in itertools.combinations(live, 2):
        for t in range(horizon):
            if at(a, t) == at(b, t):
                out.append(Violation(VERTEX_CONFLICT, (i, j), t, at(a, t), None,
                                     f"agents {i} and {j} both at {at(a, t)} at t={t}"))
            elif t > 0 and at(a, t) == at(b, t - 1) and at(b, t) == at(a, t - 1):
                e = (at(a, t - 1), at(a, t))
                out.append(Violation(EDGE_CONFLICT, (i, j), t, e, None,
                                     f"agents {i} and {j} swap along {e} at t={t}"))
    return out
