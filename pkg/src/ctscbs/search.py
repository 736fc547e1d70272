"""Forest-of-constraint-trees search over ranked joint task sequences.

Each tree follows one joint sequence from ``JointKBestStream``; trees are
opened lazily when the best open node costs more than ``(1 + omega)`` times
the cheapest unopened sequence could. ``omega = 0`` is optimal,
``omega = inf`` keeps a single tree.
"""
from __future__ import annotations

import heapq
import itertools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

from .pathing import Constraint, ConstraintSet, TimedPath, low_level_search
from .sequencing import FIXED, OPEN, JointKBestStream, JointSequence, joint_stream
from .world import CTS, INF, DistanceMaps, Instance, shortest_distances

log = logging.getLogger(__name__)

SOLVED = "solved"
INFEASIBLE = "infeasible"
TIMEOUT = "timeout"
TIE_BREAKS = ("tree-node", "conflicts")


class Conflict(NamedTuple):
    t: int
    i: int
    j: int
    kind: str          # "vertex" or "edge"
    u: tuple           # vertex, or agent i's edge source
    v: tuple | None = None

    def constraints(self) -> tuple[Constraint, Constraint]:
        if self.kind == "vertex":
            return (Constraint.vertex(self.i, self.u, self.t), Constraint.vertex(self.j, self.u, self.t))
        return (Constraint.edge(self.i, self.u, self.v, self.t), Constraint.edge(self.j, self.v, self.u, self.t))


@dataclass
class CTNode:
    constraints: ConstraintSet
    paths: tuple
    g: float
    tree_id: int
    node_id: int
    parent_id: int | None = None
    n_conflicts: int = 0


@dataclass
class SolverConfig:
    omega: float = 0.0
    time_limit: float = INF          # seconds, sequencing included
    tie_break: str = "tree-node"
    max_flowtime: float | None = None  # None: derive a sound bound from the instance
    terminal: str | None = None      # "fixed"/"open"; default follows instance mode

    def __post_init__(self):
        if not self.omega >= 0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")


@dataclass
class SolveStats:
    roots_generated: int = 0
    tsp_calls: int = 0
    hl_expansions: int = 0
    ll_calls: int = 0
    runtime: float = 0.0
    root_cost: float = INF       # cost of the best joint sequence (first root)


@dataclass
class SolveResult:
    status: str
    paths: tuple = ()
    flowtime: float | None = None
    stats: SolveStats = field(default_factory=SolveStats)
    variant: str = "CTS-CBS"
    phase: str | None = None
    expansion_log: list = field(default_factory=list, repr=False)

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "variant": self.variant,
            "phase": self.phase,
            "flowtime": self.flowtime,
            "stats": {k: (None if isinstance(v, float) and math.isinf(v) else v)
                      for k, v in asdict(self.stats).items()},
            "agents": [{"id": p.agent_id, "cost": p.cost,
                        "path": [list(v) for v in p.vertices],
                        "visits": [{"task": tid, "t": t} for tid, t in p.visits]}
                       for p in self.paths],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def load_solution_paths(text: str) -> list[TimedPath]:
    data = json.loads(text)
    return [TimedPath(a["id"], tuple(tuple(v) for v in a["path"]),
                      visits=tuple((v["task"], v["t"]) for v in a.get("visits", [])))
            for a in data["agents"]]


def detect_first_conflict(paths: Sequence) -> Conflict | None:
    """Earliest conflict, ordered by (t, i, j, vertex before edge).

    Agents past the end of their path wait at their last vertex forever.
    """
    verts = [p.vertices if isinstance(p, TimedPath) else tuple(map(tuple, p)) for p in paths]
    ids = [p.agent_id if isinstance(p, TimedPath) else k + 1 for k, p in enumerate(paths)]
    n = len(verts)
    horizon = max((len(v) for v in verts), default=0)
    prev = None
    for t in range(horizon):
        pos = [v[t] if t < len(v) else v[-1] for v in verts]
        found = []
        groups: dict = {}
        for a in range(n):
            groups.setdefault(pos[a], []).append(a)
        for v, members in groups.items():
            for a, b in itertools.combinations(members, 2):
                found.append((ids[a], ids[b], 0, v, None))
        if prev is not None:
            moves = {(prev[a], pos[a]): a for a in range(n) if prev[a] != pos[a]}
            for (x, y), a in moves.items():
                b = moves.get((y, x))
                if b is not None and ids[a] < ids[b]:
                    found.append((ids[a], ids[b], 1, x, y))
        if found:
            i, j, kind, u, v = min(found, key=lambda c: (min(c[0], c[1]), max(c[0], c[1]), c[2]))
            if i > j:
                i, j = j, i
            return Conflict(t, i, j, "vertex" if kind == 0 else "edge", tuple(u),
                            None if v is None else tuple(v))
        prev = pos
    return None


def count_conflicts(paths: Sequence) -> int:
    """Number of conflicting (pair, timestep) occurrences, with stay-at-goal padding."""
    verts = [p.vertices for p in paths]
    horizon = max(len(v) for v in verts)
    total = 0
    prev = None
    for t in range(horizon):
        pos = [v[t] if t < len(v) else v[-1] for v in verts]
        total += len(pos) - len(set(pos))
        if prev is not None:
            moves = {(prev[a], pos[a]) for a in range(len(pos)) if prev[a] != pos[a]}
            total += sum(1 for x, y in moves if (y, x) in moves) // 2
        prev = pos
    return total


def makespan_bound(instance: Instance) -> int:
    """Sound upper bound on the makespan of some optimal plan.

    An optimal plan of minimal makespan never repeats a joint state
    (distinct agent positions, visited-task sets, finished flags), so its
    makespan is below the number of such states.
    """
    states = math.perm(instance.map.n_passable, instance.n_agents)
    for a in instance.agents:
        states *= 2 ** (len(instance.tasks_of(a.id)) + 1)
    return max(states - 1, 0)


def flowtime_bound(instance: Instance) -> int:
    return instance.n_agents * makespan_bound(instance)


class CTSCBS:
    """One solve of the forest search. Single use."""

    def __init__(self, instance: Instance, config: SolverConfig | None = None,
                 distances: DistanceMaps | None = None):
        self.instance = instance
        self.config = config or SolverConfig()
        self.grid = instance.map
        self.dist = distances or DistanceMaps(self.grid)
        terminal = self.config.terminal or (FIXED if instance.mode == CTS else OPEN)
        table = shortest_distances(self.grid, instance.key_vertices(), self.dist)
        self.stream: JointKBestStream = joint_stream(instance, table, terminal)
        self.trees: list[JointSequence] = []
        self.open: list = []
        self.stats = SolveStats()
        self.log: list = []
        self._ids = itertools.count()
        self.horizon = makespan_bound(instance)
        self.bound = min(self.config.max_flowtime if self.config.max_flowtime is not None else INF,
                         instance.n_agents * self.horizon)
        self._deadline = INF

    # -- helpers ---------------------------------------------------------

    def _push(self, node: CTNode):
        if self.config.tie_break == "conflicts":
            key = (node.g, node.n_conflicts, node.tree_id, node.node_id)
        else:
            key = (node.g, node.tree_id, node.node_id)
        heapq.heappush(self.open, (key, node))

    def _annotate(self, node: CTNode) -> CTNode:
        if self.config.tie_break == "conflicts" and node.g < INF:
            node.n_conflicts = count_conflicts(node.paths)
        return node

    def _pop(self) -> CTNode:
        return heapq.heappop(self.open)[1]

    def _check_time(self):
        if time.perf_counter() > self._deadline:
            raise TimeoutError

    def _next_tree(self) -> JointSequence | None:
        while True:
            self._check_time()
            joint = self.stream.next()
            self.stats.tsp_calls = self.stream.tsp_calls
            if joint is None or joint.cost > self.bound:
                return None
            # agents ending on one vertex would block each other forever
            ends = [tuple(s.targets[-1]) for s in joint.sequences]
            if len(set(ends)) == len(ends):
                break
        self.trees.append(joint)
        return joint

    def make_root(self, joint: JointSequence) -> CTNode:
        tree_id = len(self.trees) - 1
        constraints = ConstraintSet()
        paths = []
        for seq in joint.sequences:
            self._check_time()
            self.stats.ll_calls += 1
            p = low_level_search(self.grid, seq, constraints, distances=self.dist)
            if p is None:
                paths = None
                break
            paths.append(p)
        self.stats.roots_generated += 1
        g = INF if paths is None else sum(p.cost for p in paths)
        return self._annotate(CTNode(constraints, tuple(paths or ()), g, tree_id, next(self._ids)))

    def check_new_root(self, popped: CTNode) -> CTNode:
        """Open further trees while ``popped`` may exceed the bound.

        Returns the node to expand; the other candidate goes back to OPEN.
        """
        omega = self.config.omega
        if math.isinf(omega):
            return popped
        current = popped
        while not self.open or current.g > (1 + omega) * self.stream.last_cost:
            joint = self._next_tree()
            if joint is None:
                break
            root = self.make_root(joint)
            if current.g < root.g:
                if root.g < INF:
                    self._push(root)
            else:
                self._push(current)
                current = root
        return current

    def expand(self, node: CTNode, conflict: Conflict) -> list[CTNode]:
        joint = self.trees[node.tree_id]
        children = []
        for c in conflict.constraints():
            self._check_time()
            k = c.agent - 1
            cons = node.constraints.add(c)
            old = node.paths[k]
            cap = min(self.horizon, self.bound - (node.g - old.cost))
            self.stats.ll_calls += 1
            p = low_level_search(self.grid, joint.sequences[k], cons, cost_cap=cap, distances=self.dist)
            if p is None:
                continue
            paths = node.paths[:k] + (p,) + node.paths[k + 1:]
            g = node.g - old.cost + p.cost
            child = self._annotate(CTNode(cons, paths, g, node.tree_id, next(self._ids), node.node_id))
            if g < INF:
                children.append(child)
        return children

    # -- main loop -------------------------------------------------------

    def solve(self) -> SolveResult:
        t0 = time.perf_counter()
        self._deadline = t0 + self.config.time_limit
        try:
            result = self._run()
        except TimeoutError:
            result = SolveResult(TIMEOUT)
        self.stats.tsp_calls = self.stream.tsp_calls
        self.stats.runtime = time.perf_counter() - t0
        result.stats = self.stats
        result.expansion_log = self.log
        return result

    def _run(self) -> SolveResult:
        first = self._next_tree()
        if first is None:
            return SolveResult(INFEASIBLE)
        self.stats.root_cost = first.cost
        root = self.make_root(first)
        if root.g < INF:
            self._push(root)
        while True:
            self._check_time()
            if not self.open:
                # every generated tree is exhausted; fall through to the next one
                if math.isinf(self.config.omega):
                    return SolveResult(INFEASIBLE)
                joint = self._next_tree()
                if joint is None:
                    return SolveResult(INFEASIBLE)
                node = self.make_root(joint)
                if node.g < INF:
                    self._push(node)
                continue
            popped = self._pop()
            node = self.check_new_root(popped)
            self.stats.hl_expansions += 1
            self.log.append((node.g, node.tree_id, node.node_id))
            conflict = detect_first_conflict(node.paths)
            if conflict is None:
                return SolveResult(SOLVED, node.paths, node.g)
            for child in self.expand(node, conflict):
                if child.g <= self.bound:
                    self._push(child)


def solve(instance: Instance, config: SolverConfig | None = None, **kwargs) -> SolveResult:
    if config is None:
        config = SolverConfig(**kwargs)
    elif kwargs:
        raise TypeError("pass either a config or keyword overrides, not both")
    return CTSCBS(instance, config).solve()
