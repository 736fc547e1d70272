"""Exact restricted path-TSP and lazy K-best task sequencing.

Node 0 of every cost matrix is the agent start and the last node is the
terminal (the destination, or a zero in-cost virtual node when the agent may
stop at any task). ``solve_rtsp`` is a Held-Karp DP over chains of forced
edges; ``SingleAgentKBest`` applies the partition method on top of it and
``JointKBestStream`` merges per-agent rankings best-first.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

from .world import CTS, INF, Instance

FIXED = "fixed"
OPEN = "open"


@dataclass(frozen=True)
class CostMatrix:
    costs: tuple                 # row-major, costs[i][j]
    vertices: tuple = ()         # per node; None for the virtual terminal
    task_ids: tuple = ()         # per node; None for start/terminal
    agent_id: int = 0
    open_end: bool = False

    def __post_init__(self):
        costs = tuple(tuple(row) for row in self.costs)
        object.__setattr__(self, "costs", costs)
        n = len(costs)
        if n < 2 or any(len(row) != n for row in costs):
            raise ValueError("cost matrix must be square with at least 2 nodes")
        if any(c < 0 for row in costs for c in row):
            raise ValueError("cost matrix entries must be nonnegative")
        if not self.vertices:
            object.__setattr__(self, "vertices", (None,) * n)
        if not self.task_ids:
            object.__setattr__(self, "task_ids", (None,) * n)

    @property
    def size(self) -> int:
        return len(self.costs)


@dataclass(frozen=True)
class EdgeConstraintSet:
    included: frozenset = frozenset()
    excluded: frozenset = frozenset()

    def validate(self, n: int | None = None):
        inc, exc = set(self.included), set(self.excluded)
        if inc & exc:
            raise ValueError(f"edges both included and excluded: {sorted(inc & exc)}")
        succ, pred = {}, {}
        for u, v in inc:
            if u == v:
                raise ValueError(f"included self-loop at node {u}")
            if u in succ:
                raise ValueError(f"node {u} has two included out-edges")
            if v in pred:
                raise ValueError(f"node {v} has two included in-edges")
            succ[u], pred[v] = v, u
        if n is not None:
            for u, v in inc | exc:
                if not (0 <= u < n and 0 <= v < n):
                    raise ValueError(f"edge {(u, v)} references a node outside 0..{n - 1}")
        # a chain walk from every node must terminate
        for u in succ:
            seen = {u}
            w = succ[u]
            while w in succ:
                if w in seen:
                    raise ValueError("included edges form a cycle")
                seen.add(w)
                w = succ[w]


@dataclass(frozen=True, order=True)
class TaskSequence:
    cost: float
    nodes: tuple                          # matrix node indices, virtual terminal dropped
    agent_id: int = field(default=0, compare=False)
    targets: tuple = field(default=(), compare=False)   # vertices in visit order
    task_ids: tuple = field(default=(), compare=False)  # aligned with targets

    @classmethod
    def from_targets(cls, targets: Sequence, agent_id: int = 0) -> "TaskSequence":
        """Bare sequence over explicit vertices (no task bookkeeping, cost unset)."""
        targets = tuple(tuple(t) for t in targets)
        return cls(0, tuple(range(len(targets))), agent_id, targets, (None,) * len(targets))

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.nodes, self.nodes[1:]))


@dataclass(frozen=True)
class JointSequence:
    sequences: tuple
    cost: float
    priority: tuple


def sequence_cost(joint: JointSequence | Sequence[TaskSequence]) -> float:
    seqs = joint.sequences if isinstance(joint, JointSequence) else joint
    return sum(s.cost for s in seqs)


def build_cost_matrix(instance: Instance, agent_id: int, distances, mode: str | None = None) -> CostMatrix:
    """Cost matrix over start, the agent's tasks and its terminal.

    ``distances(a, b)`` gives shortest travel time; a ``DistanceTable`` works.
    In open mode a virtual terminal is appended, reachable from every node at
    cost 0 and never left.
    """
    agent = instance.agents[agent_id - 1]
    if mode is None:
        mode = FIXED if instance.mode == CTS else OPEN
    tasks = instance.tasks_of(agent_id)
    verts = [agent.start] + [t.location for t in tasks]
    ids = [None] + [t.id for t in tasks]
    if mode == FIXED:
        if agent.destination is None:
            raise ValueError(f"agent {agent_id} has no destination for a fixed-terminal matrix")
        verts.append(agent.destination)
        ids.append(None)
        costs = [[distances(a, b) for b in verts] for a in verts]
    elif mode == OPEN:
        costs = [[distances(a, b) for b in verts] + [0] for a in verts]
        costs.append([INF] * (len(verts) + 1))
        verts.append(None)
        ids.append(None)
    else:
        raise ValueError(f"unknown matrix mode {mode!r}")
    return CostMatrix(costs, tuple(verts), tuple(ids), agent_id, mode == OPEN)


def _make_sequence(matrix: CostMatrix, order: list[int], cost) -> TaskSequence:
    if matrix.open_end:
        order = order[:-1]
    return TaskSequence(cost, tuple(order), matrix.agent_id,
                        tuple(matrix.vertices[i] for i in order),
                        tuple(matrix.task_ids[i] for i in order))


def solve_rtsp(matrix: CostMatrix, constraints: EdgeConstraintSet = EdgeConstraintSet()) -> TaskSequence | None:
    """Minimum-cost Hamiltonian path 0 -> n-1 honouring forced/forbidden edges.

    Returns None when no finite-cost path exists. Raises ValueError for an
    ill-formed constraint set.
    """
    n = matrix.size
    constraints.validate(n)
    C = matrix.costs
    end = n - 1
    excluded = constraints.excluded
    succ = dict(constraints.included)
    pred = {v: u for u, v in succ.items()}
    if 0 in pred or end in succ:
        return None

    # contract forced chains into macro-nodes (head, tail, internal cost, members)
    chains = []
    chain_of = {}
    for head in range(n):
        if head in pred:
            continue
        members = [head]
        cost = 0
        while members[-1] in succ:
            nxt = succ[members[-1]]
            cost += C[members[-1]][nxt]
            members.append(nxt)
        if cost == INF:
            return None
        for m in members:
            chain_of[m] = len(chains)
        chains.append((members[0], members[-1], cost, members))
    first, last = chain_of[0], chain_of[end]
    if first == last:
        members = chains[first][3]
        if len(members) != n:
            return None
        return _make_sequence(matrix, members, chains[first][2])

    def link(a, b):
        u, v = chains[a][1], chains[b][0]
        return INF if (u, v) in excluded else C[u][v]

    middle = [k for k in range(len(chains)) if k not in (first, last)]
    m = len(middle)
    base = chains[first][2]
    if m == 0:
        total = base + link(first, last) + chains[last][2]
        if total == INF:
            return None
        return _make_sequence(matrix, chains[first][3] + chains[last][3], total)

    size = 1 << m
    dp = [[INF] * m for _ in range(size)]
    parent = [[-1] * m for _ in range(size)]
    for j, cj in enumerate(middle):
        dp[1 << j][j] = base + link(first, cj) + chains[cj][2]
    for mask in range(1, size):
        row = dp[mask]
        for j in range(m):
            cur = row[j]
            if cur == INF or not (mask >> j) & 1:
                continue
            cj = middle[j]
            for k in range(m):
                if (mask >> k) & 1:
                    continue
                cand = cur + link(cj, middle[k]) + chains[middle[k]][2]
                nmask = mask | (1 << k)
                if cand < dp[nmask][k]:
                    dp[nmask][k] = cand
                    parent[nmask][k] = j
    full = size - 1
    best, best_j = INF, -1
    for j in range(m):
        cand = dp[full][j] + link(middle[j], last)
        if cand < best:
            best, best_j = cand, j
    if best == INF:
        return None
    best += chains[last][2]
    order_chains = []
    mask, j = full, best_j
    while j != -1:
        order_chains.append(middle[j])
        j, mask = parent[mask][j], mask & ~(1 << j)
    order = list(chains[first][3])
    for k in reversed(order_chains):
        order.extend(chains[k][3])
    order.extend(chains[last][3])
    return _make_sequence(matrix, order, best)


class SingleAgentKBest:
    """Lazily ranked task sequences of one agent (partition method).

    ``get(k)`` returns the k-th best sequence, solving new restricted TSPs
    only when rank k has not been produced before. ``calls`` counts rTSP
    solves.
    """

    def __init__(self, matrix: CostMatrix):
        self.matrix = matrix
        self.found: list[TaskSequence] = []
        self.calls = 0
        self._open: list = []
        self._pending = None
        self._started = False
        self._tick = 0

    def _solve(self, constraints: EdgeConstraintSet):
        self.calls += 1
        seq = solve_rtsp(self.matrix, constraints)
        if seq is not None:
            self._tick += 1
            full_nodes = seq.nodes + ((self.matrix.size - 1,) if self.matrix.open_end else ())
            heapq.heappush(self._open, (seq.cost, seq.nodes, self._tick, seq, full_nodes, constraints))

    def _expand(self, node):
        _, _, _, _, full_nodes, cons = node
        path_edges = list(zip(full_nodes, full_nodes[1:]))
        for l, edge in enumerate(path_edges):
            if edge in cons.included:
                continue  # excluding a forced edge leaves an empty subset
            child = EdgeConstraintSet(cons.included | frozenset(path_edges[:l]),
                                      cons.excluded | {edge})
            self._solve(child)

    def get(self, k: int) -> TaskSequence | None:
        if k < 1:
            raise ValueError("rank k must be >= 1")
        if not self._started:
            self._started = True
            self._solve(EdgeConstraintSet())
        while len(self.found) < k:
            if self._pending is not None:
                self._expand(self._pending)
                self._pending = None
            if not self._open:
                return None
            node = heapq.heappop(self._open)
            self.found.append(node[3])
            self._pending = node
        return self.found[k - 1]


def single_agent_kbest(agent_id: int, k: int, cache: dict, matrix: CostMatrix) -> TaskSequence | None:
    """Rank-``k`` sequence for ``agent_id``, memoised in ``cache``."""
    kb = cache.get(agent_id)
    if kb is None:
        kb = cache[agent_id] = SingleAgentKBest(matrix)
    return kb.get(k)


class JointKBestStream:
    """Best-first stream of joint sequences over per-agent rankings.

    Each agent contributes any object with ``get(rank)`` returning a sequence
    (with ``.cost``) or None. Expansion of an emitted priority vector is
    deferred until the next one is requested.
    """

    def __init__(self, rankers: Sequence):
        self.rankers = list(rankers)
        self.emitted: list[JointSequence] = []
        self.visited: set = set()
        self._open: list = []
        self._pending = None
        self._started = False

    @property
    def tsp_calls(self) -> int:
        return sum(getattr(r, "calls", 0) for r in self.rankers)

    def _push(self, priority: tuple):
        seqs = []
        for ranker, rank in zip(self.rankers, priority):
            s = ranker.get(rank)
            if s is None:
                return
            seqs.append(s)
        cost = sum(s.cost for s in seqs)
        if cost < INF:
            heapq.heappush(self._open, (cost, priority, tuple(seqs)))

    def expand_pending(self):
        if self._pending is None:
            return
        vec = self._pending
        self._pending = None
        for l in range(len(vec)):
            child = vec[:l] + (vec[l] + 1,) + vec[l + 1:]
            if child in self.visited:
                continue
            self.visited.add(child)
            self._push(child)

    def frontier(self) -> list[tuple]:
        return sorted(p for _, p, _ in self._open)

    def __iter__(self):
        while (joint := self.next()) is not None:
            yield joint

    def next(self) -> JointSequence | None:
        if not self._started:
            self._started = True
            first = (1,) * len(self.rankers)
            self.visited.add(first)
            self._push(first)
        self.expand_pending()
        if not self._open:
            return None
        cost, priority, seqs = heapq.heappop(self._open)
        joint = JointSequence(seqs, cost, priority)
        self.emitted.append(joint)
        self._pending = priority
        return joint

    @property
    def last_cost(self):
        return self.emitted[-1].cost if self.emitted else -math.inf


def joint_stream(instance: Instance, distances, mode: str | None = None) -> JointKBestStream:
    rankers = [SingleAgentKBest(build_cost_matrix(instance, a.id, distances, mode))
               for a in instance.agents]
    return JointKBestStream(rankers)
