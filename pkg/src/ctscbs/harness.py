"""Benchmark runner, metrics and synthetic benchmark data."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .adaptations import VARIANTS, AdaptationConfig, solve_variant
from .search import SOLVED, TIMEOUT, SolverConfig
from .sequencing import joint_stream
from .validation import validate_solution
from .world import (CTS, MG, GridMap, Instance, ScenarioEntry, adapt_dataset, bfs,
                    parse_map, parse_scenario, shortest_distances)

log = logging.getLogger(__name__)

ERROR = "error"
INVALID = "invalid"


@dataclass
class BenchConfig:
    """``maps`` maps a .map path to its .scen paths (relative to ``root``)."""
    maps: dict
    n_agents: list = field(default_factory=lambda: [5])
    n_tasks: list = field(default_factory=lambda: [10])
    fanout: tuple = (1, 3)
    omegas: list = field(default_factory=lambda: [0.0])
    variants: list = field(default_factory=lambda: ["base"])
    time_limit: float = 180.0
    seed: int = 0
    mode: str = CTS
    workers: int = 1
    root: str = "."

    def __post_init__(self):
        for name in ("maps", "n_agents", "n_tasks", "omegas", "variants"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        for scens in self.maps.values():
            if not scens:
                raise ValueError("every map needs at least one scenario")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise ValueError(f"unknown variants {bad}; choose from {VARIANTS}")
        if any(not w >= 0 for w in self.omegas):
            raise ValueError("omegas must be >= 0")
        if self.mode not in (CTS, MG):
            raise ValueError(f"mode must be {CTS} or {MG}")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        self.fanout = tuple(self.fanout)
        self.omegas = [float(w) for w in self.omegas]

    @classmethod
    def from_dict(cls, data: dict, root: str = ".") -> "BenchConfig":
        data = dict(data)
        data.setdefault("root", root)
        if isinstance(data.get("omegas"), list):
            data["omegas"] = [math.inf if w in ("inf", None) else w for w in data["omegas"]]
        return cls(**data)

    @classmethod
    def load(cls, path) -> "BenchConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), str(path.parent))

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.root) / p

    def missing_files(self) -> list[str]:
        out = []
        for m, scens in self.maps.items():
            for p in [m, *scens]:
                if not self.resolve(p).is_file():
                    out.append(str(self.resolve(p)))
        return out


@dataclass
class RunRecord:
    instance_id: str
    map: str
    scenario: str
    n_agents: int
    n_tasks: int
    variant: str
    omega: float
    status: str
    runtime: float = 0.0
    flowtime: int | None = None
    cost_lb: float | None = None
    sqr: float | None = None
    roots_generated: int = 0
    tsp_calls: int = 0
    hl_expansions: int = 0
    phase: str | None = None
    detail: str = ""


CSV_COLUMNS = [f.name for f in dataclasses.fields(RunRecord)]


def compute_sqr(cost_lb, cost_sol) -> float:
    """Solution quality ratio ``cost_lb / cost_sol``; 1.0 for two zero costs."""
    if cost_lb < 0 or cost_sol < 0:
        raise ValueError("costs must be nonnegative")
    if cost_sol < cost_lb:
        raise ValueError(f"solution cost {cost_sol} below its lower bound {cost_lb}")
    if cost_sol == 0:
        return 1.0
    return cost_lb / cost_sol


def jtsp_lower_bound(instance: Instance) -> float:
    """Cheapest joint sequence cost; open-ended for instances without destinations."""
    table = shortest_distances(instance.map, instance.key_vertices())
    first = joint_stream(instance, table).next()
    return math.inf if first is None else first.cost


def cell_seed(seed: int, map_name: str, scen_index: int, n_agents: int, n_tasks: int) -> int:
    key = f"{seed}|{map_name}|{scen_index}|{n_agents}|{n_tasks}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def _run_cell(job) -> list[RunRecord]:
    config, map_path, scen_path, scen_index, n_agents, n_tasks = job
    map_name, scen_name = Path(map_path).name, Path(scen_path).name
    iid = f"{map_name}/{scen_name}/n{n_agents}/m{n_tasks}"
    runs = [(v, w) for v in config.variants for w in config.omegas]

    def base(v, w, status, **kw):
        return RunRecord(iid, map_name, scen_name, n_agents, n_tasks, v, w, status, **kw)

    try:
        grid = parse_map(config.resolve(map_path).read_text())
        entries = parse_scenario(config.resolve(scen_path).read_text())
        seed = cell_seed(config.seed, map_name, scen_index, n_agents, n_tasks)
        instance = adapt_dataset(grid, entries, n_agents, n_tasks, config.fanout, seed, config.mode)
        cost_lb = jtsp_lower_bound(instance)
    except (OSError, ValueError) as exc:
        log.warning("cell %s failed: %s", iid, exc)
        return [base(v, w, ERROR, detail=str(exc)) for v, w in runs]

    out = []
    for v, w in runs:
        solver = SolverConfig(omega=w, time_limit=config.time_limit)
        try:
            res = solve_variant(instance, AdaptationConfig(v, solver))
        except ValueError as exc:
            out.append(base(v, w, ERROR, detail=str(exc)))
            continue
        st = res.stats
        rec = base(v, w, res.status, runtime=st.runtime, roots_generated=st.roots_generated,
                   tsp_calls=st.tsp_calls, hl_expansions=st.hl_expansions, phase=res.phase,
                   cost_lb=cost_lb if cost_lb < math.inf else None)
        if res.status == SOLVED:
            violations = validate_solution(instance, res.paths)
            rec.flowtime = res.flowtime
            if violations:
                rec.status = INVALID
                rec.detail = "; ".join(map(str, violations[:3]))
            else:
                rec.sqr = compute_sqr(cost_lb, res.flowtime)
        log.info("%s %s omega=%s -> %s", iid, v, w, rec.status)
        out.append(rec)
    return out


def record_key(r: RunRecord):
    return (r.map, r.scenario, r.n_agents, r.n_tasks, VARIANTS.index(r.variant), r.omega)


def run_benchmark(config: BenchConfig) -> list[RunRecord]:
    """One record per (scenario, n_agents, n_tasks, variant, omega), sorted."""
    jobs = [(config, m, s, k, n, t)
            for m, scens in config.maps.items()
            for k, s in enumerate(scens)
            for n in config.n_agents
            for t in config.n_tasks]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            chunks = list(pool.map(_run_cell, jobs))
    else:
        chunks = [_run_cell(j) for j in jobs]
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=record_key)
    return records


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.6g}"
    return str(v)


def records_to_csv(records: Sequence[RunRecord], columns: Sequence[str] = CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in sorted(records, key=record_key):
        d = dataclasses.asdict(r)
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


def write_csv(records: Sequence[RunRecord], path) -> None:
    Path(path).write_text(records_to_csv(records))


def read_csv(path) -> list[RunRecord]:
    types = {f.name: f.type for f in dataclasses.fields(RunRecord)}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                t = types[k]
                if v == "":
                    kw[k] = None if "None" in t else ("" if t == "str" else 0)
                elif t.startswith("int"):
                    kw[k] = int(v)
                elif t.startswith("float"):
                    kw[k] = float(v)
                else:
                    kw[k] = v
            out.append(RunRecord(**kw))
    return out


@dataclass
class CellSummary:
    map: str
    n_agents: int
    n_tasks: int
    variant: str
    omega: float
    runs: int
    success_rate: float
    mean_runtime: float
    mean_sqr: float | None
    mean_roots: float
    mean_tsp_calls: float


def summarize(records: Sequence[RunRecord], time_limit: float) -> list[CellSummary]:
    """Per-cell aggregates; unsolved runs count as taking the full time limit."""
    cells = defaultdict(list)
    for r in records:
        cells[(r.map, r.n_agents, r.n_tasks, r.variant, r.omega)].append(r)
    out = []
    for key in sorted(cells, key=lambda k: (k[0], k[1], k[2], VARIANTS.index(k[3]), k[4])):
        rs = cells[key]
        solved = [r for r in rs if r.status == SOLVED]
        runtimes = [r.runtime if r.status == SOLVED else time_limit for r in rs]
        sqrs = [r.sqr for r in solved if r.sqr is not None]
        out.append(CellSummary(*key, len(rs), len(solved) / len(rs), float(np.mean(runtimes)),
                               float(np.mean(sqrs)) if sqrs else None,
                               float(np.mean([r.roots_generated for r in rs])),
                               float(np.mean([r.tsp_calls for r in rs]))))
    return out


def format_summary(rows: Sequence[CellSummary]) -> str:
    head = f"{'map':<20} {'N':>3} {'M':>3} {'variant':<7} {'omega':>6} {'runs':>4} " \
           f"{'succ':>5} {'runtime':>8} {'sqr':>6} {'roots':>7} {'tsp':>7}"
    lines = [head]
    for s in rows:
        sqr = "-" if s.mean_sqr is None else f"{s.mean_sqr:.3f}"
        lines.append(f"{s.map:<20} {s.n_agents:>3} {s.n_tasks:>3} {s.variant:<7} {_fmt(s.omega):>6} "
                     f"{s.runs:>4} {s.success_rate:>5.2f} {s.mean_runtime:>8.3f} {sqr:>6} "
                     f"{s.mean_roots:>7.1f} {s.mean_tsp_calls:>7.1f}")
    return "\n".join(lines)


def plot_summary(records: Sequence[RunRecord], time_limit: float, out_path) -> None:
    """Success rate and mean runtime against task count, one line per (variant, omega)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = summarize(records, time_limit)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    lines = defaultdict(list)
    for s in rows:
        lines[(s.variant, s.omega, s.n_agents)].append(s)
    for (variant, omega, n), ss in sorted(lines.items(), key=lambda kv: (VARIANTS.index(kv[0][0]),) + kv[0][1:]):
        by_m = defaultdict(list)
        for s in ss:
            by_m[s.n_tasks].append(s)
        ms = sorted(by_m)
        label = f"{variant} w={_fmt(omega)} N={n}"
        ax1.plot(ms, [np.mean([s.success_rate for s in by_m[m]]) for m in ms], marker="o", label=label)
        ax2.plot(ms, [np.mean([s.mean_runtime for s in by_m[m]]) for m in ms], marker="o", label=label)
    ax1.set_xlabel("tasks")
    ax1.set_ylabel("success rate")
    ax1.set_ylim(-0.05, 1.05)
    ax2.set_xlabel("tasks")
    ax2.set_ylabel("mean runtime (s)")
    ax2.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)


# --------------------------------------------------------------------------
# synthetic maps and scenarios


def empty_map(width: int, height: int) -> GridMap:
    return GridMap(width, height, frozenset())


def random_map(width: int, height: int, density: float, seed: int = 0) -> GridMap:
    rng = np.random.default_rng(seed)
    cells = [(r, c) for r in range(height) for c in range(width)]
    n = int(round(density * len(cells)))
    idx = rng.choice(len(cells), size=n, replace=False)
    return GridMap(width, height, frozenset(cells[i] for i in idx))


def room_map(size: int = 16, room: int = 4, seed: int = 0) -> GridMap:
    """Square rooms separated by one-cell walls, one random door per shared wall."""
    rng = np.random.default_rng(seed)
    blocked = set()
    walls = list(range(room, size, room + 1))
    for w in walls:
        for k in range(size):
            blocked.add((w, k))
            blocked.add((k, w))
    bounds = [-1] + walls + [size]
    spans = [(bounds[i] + 1, bounds[i + 1] - 1) for i in range(len(bounds) - 1)]
    for w in walls:
        for lo, hi in spans:
            # doors through the horizontal and the vertical wall at this span
            blocked.discard((w, int(rng.integers(lo, hi + 1))))
            blocked.discard((int(rng.integers(lo, hi + 1)), w))
    return GridMap(size, size, frozenset(blocked))


def random_scenario(grid: GridMap, count: int, seed: int = 0) -> list[ScenarioEntry]:
    """``count`` rows with distinct starts and distinct goals in the largest component."""
    rng = np.random.default_rng(seed)
    free = list(grid.cells)
    comp, seen = [], set()
    for v in free:
        if v not in seen:
            c = list(bfs(grid, v))
            seen.update(c)
            if len(c) > len(comp):
                comp = c
    comp.sort()
    if len(comp) < count:
        raise ValueError(f"largest component has {len(comp)} cells, need {count}")
    starts = rng.choice(len(comp), size=count, replace=False)
    goals = rng.choice(len(comp), size=count, replace=False)
    return [ScenarioEntry(tuple(comp[s]), tuple(comp[g])) for s, g in zip(starts, goals)]


def synthetic_instance(grid: GridMap, n_agents: int, n_tasks: int, seed: int = 0,
                       mode: str = CTS, fanout: tuple = (1, 3)) -> Instance:
    entries = random_scenario(grid, n_agents + n_tasks, seed)
    lo, hi = fanout
    return adapt_dataset(grid, entries, n_agents, n_tasks, (min(lo, n_agents), min(hi, n_agents)),
                         seed, mode)


def default_workers() -> int:
    return max(1, (os.cpu_count() or 2) - 1)
