"""Independent reference implementations and instance generators for tests."""
from __future__ import annotations

import itertools
from collections import deque
from pathlib import Path

import numpy as np

from ctscbs.pathing import EDGE, VERTEX, Constraint, ConstraintSet
from ctscbs.world import CTS, MG, AgentSpec, GridMap, Instance, TaskSpec, Vertex

FIXTURES = Path(__file__).parent / "fixtures"


def random_small_instance(seed: int, mode: str = CTS, max_side: int = 6, max_agents: int = 3,
                          max_tasks: int = 3) -> Instance:
    """Grid of 3..max_side per side, at most 20% obstacles, agents and tasks on free cells."""
    rng = np.random.default_rng(seed)
    h = int(rng.integers(3, max_side + 1))
    w = int(rng.integers(3, max_side + 1))
    cells = [(r, c) for r in range(h) for c in range(w)]
    nb = int(rng.integers(0, int(0.2 * h * w) + 1))
    idx = rng.permutation(len(cells))
    blocked = [cells[i] for i in idx[:nb]]
    free = [cells[i] for i in idx[nb:]]
    n = int(rng.integers(1, max_agents + 1))
    m = int(rng.integers(0, max_tasks + 1))
    if len(free) < 2 * n:
        n = 1
    p = rng.permutation(len(free))
    starts = [free[i] for i in p[:n]]
    p2 = rng.permutation(len(free))
    dests = [free[i] for i in p2[:n]]
    tasks = []
    for j in range(m):
        loc = free[int(rng.integers(len(free)))]
        size = int(rng.integers(1, n + 1))
        who = rng.choice(np.arange(1, n + 1), size=size, replace=False)
        tasks.append(TaskSpec(j + 1, Vertex(*loc), frozenset(int(a) for a in who)))
    grid = GridMap(w, h, frozenset(blocked))
    agents = [AgentSpec(k + 1, Vertex(*starts[k]), Vertex(*dests[k]) if mode == CTS else None)
              for k in range(n)]
    return Instance(grid, agents, tasks, mode)


def grid_bfs(grid: GridMap, src) -> dict:
    dist = {tuple(src): 0}
    q = deque([tuple(src)])
    while q:
        r, c = q.popleft()
        for n in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if n not in dist and 0 <= n[0] < grid.height and 0 <= n[1] < grid.width \
                    and n not in grid.blocked:
                dist[n] = dist[(r, c)] + 1
                q.append(n)
    return dist


def spacetime_bfs(grid: GridMap, targets, constraints, agent: int) -> int | None:
    """Minimum arrival time at the last target, visiting ``targets`` in order.

    Plain breadth-first search over (vertex, time, stage) up to a horizon past
    the last constraint; the agent must be able to stay at the end forever.
    """
    targets = [tuple(t) for t in targets]
    cons = [c for c in constraints if c.agent == agent]
    vbad = {(c.u, c.t) for c in cons if c.kind == VERTEX}
    ebad = {(c.u, c.v, c.t) for c in cons if c.kind == EDGE}
    last_t = max((c.t for c in cons), default=0)
    horizon = last_t + 2 + len(targets) * (grid.width * grid.height + 1)
    final = targets[-1]

    def advance(stage, v):
        while stage < len(targets) - 1 and targets[stage + 1] == v:
            stage += 1
        return stage

    def can_rest(v, t):
        return all(not (u == v and s >= t) for (u, s) in vbad) and \
            all(not (u == v and w == v and s > t) for (u, w, s) in ebad)

    start = targets[0]
    if (start, 0) in vbad:
        return None
    frontier = {(start, advance(0, start))}
    for t in range(horizon + 1):
        for v, stage in frontier:
            if stage == len(targets) - 1 and v == final and can_rest(v, t):
                return t
        nxt = set()
        for v, stage in frontier:
            r, c = v
            for u in ((r, c), (r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
                if not (0 <= u[0] < grid.height and 0 <= u[1] < grid.width) or u in grid.blocked:
                    continue
                if (u, t + 1) in vbad or (v, u, t + 1) in ebad:
                    continue
                nxt.add((u, advance(stage, u)))
        frontier = nxt
    return None


def random_ll_query(seed: int):
    """A 5x5 grid, 2-3 ordered targets and a handful of constraints on agent 1."""
    rng = np.random.default_rng(seed)
    cells = [(r, c) for r in range(5) for c in range(5)]
    blocked = {cells[i] for i in rng.choice(25, size=int(rng.integers(0, 5)), replace=False)}
    free = [v for v in cells if v not in blocked]
    g = GridMap(5, 5, frozenset(blocked))
    k = int(rng.integers(2, 4))
    targets = [free[i] for i in rng.choice(len(free), size=k, replace=True)]
    if targets[0] == targets[1] and k == 2:
        targets[1] = free[(free.index(targets[0]) + 1) % len(free)]
    cons = []
    for _ in range(int(rng.integers(0, 8))):
        t = int(rng.integers(0, 12))
        v = free[int(rng.integers(len(free)))]
        if rng.random() < 0.6:
            cons.append(Constraint.vertex(1, v, t))
        else:
            nbrs = [u for u in g.neighbors(v)] + [Vertex(*v)]
            u = nbrs[int(rng.integers(len(nbrs)))]
            cons.append(Constraint.edge(1, v, u, max(t, 1)))
    return g, targets, ConstraintSet(cons)


def all_orders(matrix_costs, open_end: bool):
    """Cost of every visiting order over nodes 1..n-2 (open: 1..n-2 then the virtual end)."""
    n = len(matrix_costs)
    inner = range(1, n - 1)
    out = []
    for perm in itertools.permutations(inner):
        nodes = (0,) + perm + (n - 1,)
        out.append((sum(matrix_costs[a][b] for a, b in zip(nodes, nodes[1:])), nodes))
    return out


def load_fixture(name: str) -> str:
    return (FIXTURES / name).read_text()


__all__ = ["random_small_instance", "random_ll_query", "spacetime_bfs", "grid_bfs", "all_orders", "load_fixture",
           "FIXTURES", "CTS", "MG"]
