"""Grid worlds, MovingAI file ingestion, instances and key-vertex distances."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

INF = math.inf

PASSABLE_CHARS = frozenset(".GS")
BLOCKED_CHARS = frozenset("@TO")

CTS = "CTS"
MG = "MG"
MODES = (CTS, MG)


class ParseError(ValueError):
    """Raised for malformed map, scenario or instance text."""


class Vertex(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    blocked: frozenset = frozenset()

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"map dimensions must be positive, got {self.height}x{self.width}")
        object.__setattr__(self, "blocked", frozenset(Vertex(*v) for v in self.blocked))
        for v in self.blocked:
            if not self.in_bounds(v):
                raise ValueError(f"blocked cell {tuple(v)} outside {self.height}x{self.width} map")

    def in_bounds(self, v) -> bool:
        return 0 <= v[0] < self.height and 0 <= v[1] < self.width

    def passable(self, v) -> bool:
        return self.in_bounds(v) and v not in self.blocked

    @cached_property
    def cells(self) -> tuple:
        return tuple(Vertex(r, c) for r in range(self.height) for c in range(self.width)
                     if (r, c) not in self.blocked)

    @property
    def n_passable(self) -> int:
        return len(self.cells)

    @cached_property
    def _adjacency(self) -> dict:
        adj = {}
        for r, c in self.cells:
            adj[(r, c)] = tuple(
                Vertex(r + dr, c + dc)
                for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
                if self.passable((r + dr, c + dc))
            )
        return adj

    def neighbors(self, v) -> tuple:
        """Passable 4-connected neighbours of ``v`` (excludes ``v`` itself)."""
        return self._adjacency[v]

    def rows(self) -> list[str]:
        return ["".join("@" if (r, c) in self.blocked else "." for c in range(self.width))
                for r in range(self.height)]

    @classmethod
    def from_rows(cls, rows: Sequence[str]) -> "GridMap":
        if not rows:
            raise ParseError("map has no rows")
        width = len(rows[0])
        blocked = set()
        for r, row in enumerate(rows):
            if len(row) != width:
                raise ParseError(f"row {r} has length {len(row)}, expected {width}")
            for c, ch in enumerate(row):
                if ch in BLOCKED_CHARS:
                    blocked.add(Vertex(r, c))
                elif ch not in PASSABLE_CHARS:
                    raise ParseError(f"row {r}: unknown cell character {ch!r}")
        return cls(width, len(rows), frozenset(blocked))


@dataclass(frozen=True)
class AgentSpec:
    id: int
    start: Vertex
    destination: Vertex | None = None


@dataclass(frozen=True)
class TaskSpec:
    id: int
    location: Vertex
    assignees: frozenset

    def __post_init__(self):
        if not self.assignees:
            raise ValueError(f"task {self.id} has no assignees")
        object.__setattr__(self, "assignees", frozenset(self.assignees))


@dataclass(frozen=True)
class Instance:
    map: GridMap
    agents: tuple
    tasks: tuple = ()
    mode: str = CTS

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        self.validate()

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        ids = [a.id for a in self.agents]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"agent ids must be 1..N in order, got {ids}")
        starts = [a.start for a in self.agents]
        if len(set(starts)) != len(starts):
            raise ValueError("agent starts are not pairwise distinct")
        for a in self.agents:
            if not self.map.passable(a.start):
                raise ValueError(f"agent {a.id} start {tuple(a.start)} is not passable")
            if self.mode == CTS:
                if a.destination is None:
                    raise ValueError(f"agent {a.id} has no destination in CTS mode")
                if not self.map.passable(a.destination):
                    raise ValueError(f"agent {a.id} destination {tuple(a.destination)} is not passable")
            elif a.destination is not None:
                raise ValueError(f"agent {a.id} has a destination in MG mode")
        if self.mode == CTS:
            dests = [a.destination for a in self.agents]
            if len(set(dests)) != len(dests):
                raise ValueError("agent destinations are not pairwise distinct")
        for t in self.tasks:
            if not self.map.passable(t.location):
                raise ValueError(f"task {t.id} location {tuple(t.location)} is not passable")
            bad = [i for i in t.assignees if not 1 <= i <= len(self.agents)]
            if bad:
                raise ValueError(f"task {t.id} assigned to unknown agents {sorted(bad)}")

    def tasks_of(self, agent_id: int) -> list[TaskSpec]:
        return [t for t in self.tasks if agent_id in t.assignees]

    def key_vertices(self) -> list[Vertex]:
        keys = []
        for a in self.agents:
            keys.append(a.start)
            if a.destination is not None:
                keys.append(a.destination)
        keys.extend(t.location for t in self.tasks)
        return list(dict.fromkeys(keys))

    def with_destinations(self, dests: dict) -> "Instance":
        """CTS copy of an MG instance with ``dests[agent_id]`` as destinations."""
        agents = [AgentSpec(a.id, a.start, Vertex(*dests[a.id])) for a in self.agents]
        return Instance(self.map, agents, self.tasks, CTS)

    def to_dict(self) -> dict:
        return {
            "map": self.map.rows(),
            "agents": [{"id": a.id, "start": list(a.start),
                        "dest": None if a.destination is None else list(a.destination)}
                       for a in self.agents],
            "tasks": [{"id": t.id, "loc": list(t.location), "assignees": sorted(t.assignees)}
                      for t in self.tasks],
            "mode": self.mode,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        try:
            grid = GridMap.from_rows(data["map"])
            agents = [AgentSpec(a["id"], Vertex(*a["start"]),
                                None if a.get("dest") is None else Vertex(*a["dest"]))
                      for a in data["agents"]]
            tasks = [TaskSpec(t["id"], Vertex(*t["loc"]), frozenset(t["assignees"]))
                     for t in data.get("tasks", [])]
            return cls(grid, agents, tasks, data.get("mode", CTS))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed instance document: {exc!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"instance is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


# --------------------------------------------------------------------------
# MovingAI formats


def parse_map(text: str) -> GridMap:
    lines = text.splitlines()
    header = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        if line == "map":
            break
        parts = line.split()
        if len(parts) != 2 or parts[0] not in ("type", "height", "width"):
            raise ParseError(f"line {i}: malformed header line {line!r}")
        header[parts[0]] = parts[1]
    else:
        raise ParseError("missing 'map' line")
    try:
        height, width = int(header["height"]), int(header["width"])
    except KeyError as exc:
        raise ParseError(f"header is missing {exc.args[0]!r}") from None
    except ValueError:
        raise ParseError("height/width are not integers") from None
    if height <= 0 or width <= 0:
        raise ParseError(f"non-positive dimensions {height}x{width}")
    rows = lines[i:i + height]
    if len(rows) < height:
        raise ParseError(f"line {i + len(rows) + 1}: expected {height} rows, found {len(rows)}")
    blocked = set()
    for r, row in enumerate(rows):
        lineno = i + r + 1
        row = row.rstrip("\r\n")
        if len(row) != width:
            raise ParseError(f"line {lineno}: row length {len(row)} != width {width}")
        for c, ch in enumerate(row):
            if ch in BLOCKED_CHARS:
                blocked.add(Vertex(r, c))
            elif ch not in PASSABLE_CHARS:
                raise ParseError(f"line {lineno}: unknown cell character {ch!r}")
    for extra, line in enumerate(lines[i + height:], start=i + height + 1):
        if line.strip():
            raise ParseError(f"line {extra}: unexpected content after map rows")
    return GridMap(width, height, frozenset(blocked))


def serialize_map(grid: GridMap) -> str:
    return "\n".join(["type octile", f"height {grid.height}", f"width {grid.width}", "map",
                      *grid.rows()]) + "\n"


class ScenarioEntry(NamedTuple):
    start: Vertex
    goal: Vertex


def parse_scenario(text: str) -> list[ScenarioEntry]:
    entries = []
    row_index = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("version"):
            continue
        cols = line.rstrip("\r\n").split("\t")
        if len(cols) != 9:
            raise ParseError(f"scenario row {row_index} (line {lineno}): expected 9 columns, got {len(cols)}")
        try:
            sx, sy, gx, gy = (int(c) for c in cols[4:8])
        except ValueError:
            raise ParseError(f"scenario row {row_index} (line {lineno}): non-integer coordinates") from None
        entries.append(ScenarioEntry(Vertex(sy, sx), Vertex(gy, gx)))
        row_index += 1
    return entries


def serialize_scenario(entries: Iterable[ScenarioEntry], map_name: str, grid: GridMap) -> str:
    lines = ["version 1"]
    for k, (s, g) in enumerate(entries):
        opt = bfs(grid, s).get(tuple(g), -1)
        lines.append("\t".join(str(x) for x in (k // 10, map_name, grid.width, grid.height,
                                                 s.col, s.row, g.col, g.row, f"{opt:.8f}")))
    return "\n".join(lines) + "\n"


def adapt_dataset(grid: GridMap, entries: Sequence[ScenarioEntry], n_agents: int, n_tasks: int,
                  fanout_range: tuple[int, int] = (1, 3), seed: int = 0, mode: str = CTS) -> Instance:
    """Build an instance from scenario rows.

    The first ``n_agents`` rows become agents; the starts of the following
    ``n_tasks`` rows become task locations. Each task gets a uniformly sized,
    uniformly drawn assignee set.
    """
    lo, hi = fanout_range
    if not 1 <= lo <= hi <= n_agents:
        raise ValueError(f"fanout range {fanout_range} not within [1, {n_agents}]")
    if len(entries) < n_agents + n_tasks:
        raise ValueError(f"need {n_agents + n_tasks} scenario entries, got {len(entries)}")
    chosen = entries[:n_agents]
    seen: dict = {}
    clashes = []
    for k, e in enumerate(chosen):
        if e.start in seen:
            clashes.append((seen[e.start], k))
        seen.setdefault(e.start, k)
    if mode == CTS:
        seen_goal: dict = {}
        for k, e in enumerate(chosen):
            if e.goal in seen_goal:
                clashes.append((seen_goal[e.goal], k))
            seen_goal.setdefault(e.goal, k)
    if clashes:
        raise ValueError(f"duplicate vertices between scenario entries {clashes}")

    rng = np.random.default_rng(seed)
    agents = [AgentSpec(k + 1, Vertex(*e.start), Vertex(*e.goal) if mode == CTS else None)
              for k, e in enumerate(chosen)]
    tasks = []
    for j, e in enumerate(entries[n_agents:n_agents + n_tasks]):
        size = int(rng.integers(lo, hi + 1))
        who = rng.choice(np.arange(1, n_agents + 1), size=size, replace=False)
        tasks.append(TaskSpec(j + 1, Vertex(*e.start), frozenset(int(a) for a in who)))
    return Instance(grid, agents, tasks, mode)


# --------------------------------------------------------------------------
# distances


def manhattan(a, b) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def bfs(grid: GridMap, source) -> dict:
    """Unit-cost distances from ``source`` to every reachable passable cell."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        d = dist[v] + 1
        for u in grid.neighbors(v):
            if u not in dist:
                dist[u] = d
                queue.append(u)
    return dist


class DistanceMaps:
    """Lazily computed single-source distance fields, one per queried source."""

    def __init__(self, grid: GridMap):
        self.grid = grid
        self._fields: dict = {}

    def field(self, source) -> dict:
        f = self._fields.get(source)
        if f is None:
            if not self.grid.passable(source):
                raise ValueError(f"{tuple(source)} is not a passable cell")
            f = self._fields[source] = bfs(self.grid, source)
        return f

    def __call__(self, a, b):
        return self.field(b).get(a, INF)


@dataclass
class DistanceTable:
    keys: list
    matrix: list = field(repr=False)

    @cached_property
    def index(self) -> dict:
        return {k: i for i, k in enumerate(self.keys)}

    def __call__(self, a, b):
        return self.matrix[self.index[a]][self.index[b]]


def shortest_distances(grid: GridMap, keys: Sequence, maps: DistanceMaps | None = None) -> DistanceTable:
    keys = [Vertex(*k) for k in keys]
    for k in keys:
        if not grid.in_bounds(k):
            raise ValueError(f"key {tuple(k)} is out of bounds")
        if not grid.passable(k):
            raise ValueError(f"key {tuple(k)} is blocked")
    maps = maps or DistanceMaps(grid)
    unique = list(dict.fromkeys(keys))
    fields = {k: maps.field(k) for k in unique}
    matrix = [[fields[a].get(b, INF) for b in keys] for a in keys]
    return DistanceTable(keys, matrix)
