"""Exhaustive joint-state A* for tiny instances; ground truth for the solver.

Shares nothing with the solver beyond the instance types: own BFS, own
ordering-free task bookkeeping (visited-task bitmasks instead of sequences),
own conflict rules. Finished agents stay on their final vertex forever.
"""
from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

from .world import CTS, INF, Instance

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
HORIZON = "horizon"

_MOVES = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class OracleResult:
    status: str
    flowtime: int | None = None
    expanded: int = 0

    @property
    def solved(self) -> bool:
        return self.status == OPTIMAL


def _bfs(grid, src):
    dist = {src: 0}
    q = deque([src])
    while q:
        r, c = q.popleft()
        for dr, dc in _MOVES[1:]:
            n = (r + dr, c + dc)
            if n not in dist and 0 <= n[0] < grid.height and 0 <= n[1] < grid.width \
                    and n not in grid.blocked:
                dist[n] = dist[(r, c)] + 1
                q.append(n)
    return dist


class _AgentModel:
    """Remaining-work lower bound for one agent: exact TSP over its leftover tasks."""

    def __init__(self, instance: Instance, agent, fields):
        self.start = tuple(agent.start)
        self.dest = None if agent.destination is None else tuple(agent.destination)
        tasks = [tuple(t.location) for t in instance.tasks if agent.id in t.assignees]
        self.locs = tasks
        self.full = (1 << len(tasks)) - 1
        self.at = {}
        for j, loc in enumerate(tasks):
            self.at[loc] = self.at.get(loc, 0) | (1 << j)
        self.fields = fields
        # MG agents stop on a task vertex (their start if they have none)
        self.finals = frozenset(tasks or [self.start]) if self.dest is None else frozenset([self.dest])
        self.h = lru_cache(maxsize=None)(self._h)
        self.tail = lru_cache(maxsize=None)(self._tail)

    def d(self, a, b):
        return self.fields[b].get(a, INF)

    def to_final(self, v):
        return min(self.d(v, f) for f in self.finals)

    def _tail(self, j, rem):
        # at task j, rem = tasks still to visit
        if rem == 0:
            return 0 if self.dest is None else self.d(self.locs[j], self.dest)
        best = INF
        for k in range(len(self.locs)):
            if rem >> k & 1:
                best = min(best, self.d(self.locs[j], self.locs[k]) + self.tail(k, rem & ~(1 << k)))
        return best

    def _h(self, v, mask):
        rem = self.full & ~mask
        if rem == 0:
            return self.to_final(v)
        best = INF
        for k in range(len(self.locs)):
            if rem >> k & 1:
                best = min(best, self.d(v, self.locs[k]) + self.tail(k, rem & ~(1 << k)))
        return best

    def visit(self, v, mask):
        return mask | self.at.get(v, 0)

    def can_finish(self, v, mask):
        return mask == self.full and v in self.finals


def brute_force_oracle(instance: Instance, horizon: int | None = None,
                       max_expansions: int | None = None) -> OracleResult:
    """Optimal flowtime by A* over (positions, visited sets, finished flags).

    ``horizon`` caps the flowtime explored; exceeding it (or
    ``max_expansions``) yields status ``"horizon"``.
    """
    grid = instance.map
    targets = {tuple(v) for v in instance.key_vertices()}
    targets |= {tuple(a.start) for a in instance.agents}
    fields = {v: _bfs(grid, v) for v in targets}
    models = [_AgentModel(instance, a, fields) for a in instance.agents]
    if instance.mode == CTS and any(m.dest is None for m in models):
        raise ValueError("CTS instance with a missing destination")
    n = len(models)

    def nbrs(v):
        out = []
        for dr, dc in _MOVES:
            u = (v[0] + dr, v[1] + dc)
            if 0 <= u[0] < grid.height and 0 <= u[1] < grid.width and u not in grid.blocked:
                out.append(u)
        return out

    nbr_cache = {}

    def moves_of(v):
        m = nbr_cache.get(v)
        if m is None:
            m = nbr_cache[v] = nbrs(v)
        return m

    def hsum(pos, masks, done):
        return sum(0 if done[k] else models[k].h(pos[k], masks[k]) for k in range(n))

    # finished agents occupy distinct vertices forever
    if not any(len(set(c)) == n for c in itertools.product(*(sorted(m.finals) for m in models))):
        return OracleResult(INFEASIBLE)

    pos0 = tuple(tuple(a.start) for a in instance.agents)
    masks0 = tuple(models[k].visit(pos0[k], 0) for k in range(n))
    done0 = (False,) * n
    s0 = (pos0, masks0, done0)
    h0 = hsum(*s0)
    if h0 == INF:
        return OracleResult(INFEASIBLE)
    best = {s0: 0}
    tick = itertools.count()
    heap = [(h0, 0, next(tick), s0)]
    cut = False
    expanded = 0
    while heap:
        f, g, _, state = heapq.heappop(heap)
        if g > best[state]:
            continue
        pos, masks, done = state
        if all(done):
            return OracleResult(OPTIMAL, g, expanded)
        expanded += 1
        if max_expansions is not None and expanded > max_expansions:
            return OracleResult(HORIZON, None, expanded)

        def relax(ns, ng):
            nonlocal cut
            nh = hsum(*ns)
            if nh == INF:
                return
            if horizon is not None and ng + nh > horizon:
                cut = True
                return
            if ng < best.get(ns, INF):
                best[ns] = ng
                heapq.heappush(heap, (ng + nh, ng, next(tick), ns))

        # finishing is free and happens in place
        for k in range(n):
            if not done[k] and models[k].can_finish(pos[k], masks[k]):
                relax((pos, masks, done[:k] + (True,) + done[k + 1:]), g)

        active = [k for k in range(n) if not done[k]]
        options = [moves_of(pos[k]) for k in active]
        step = len(active)
        for choice in itertools.product(*options):
            new = list(pos)
            for k, u in zip(active, choice):
                new[k] = u
            if len(set(new)) < n:
                continue
            swap = False
            for a, b in itertools.combinations(active, 2):
                if new[a] == pos[b] and new[b] == pos[a]:
                    swap = True
                    break
            if swap:
                continue
            new_t = tuple(new)
            new_masks = tuple(models[k].visit(new_t[k], masks[k]) if not done[k] else masks[k]
                              for k in range(n))
            relax((new_t, new_masks, done), g + step)
    return OracleResult(HORIZON if cut else INFEASIBLE, None, expanded)
