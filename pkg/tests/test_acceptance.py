"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines.
"""
import itertools
import math
import time
import warnings
from functools import cache

import numpy as np
import pytest

from ctscbs.adaptations import solve_mg_b
from ctscbs.harness import compute_sqr, jtsp_lower_bound, room_map, synthetic_instance
from ctscbs.oracle import brute_force_oracle
from ctscbs.pathing import low_level_search
from ctscbs.search import INFEASIBLE, SOLVED, SolverConfig, solve
from ctscbs.sequencing import CostMatrix, JointKBestStream, SingleAgentKBest, TaskSequence, joint_stream
from ctscbs.validation import validate_solution
from ctscbs.world import (MG, parse_map, parse_scenario, serialize_map, serialize_scenario,
                          shortest_distances)

from helpers import FIXTURES, all_orders, grid_bfs, random_ll_query, random_small_instance, spacetime_bfs
from mutations import mutations

SMALL_SEEDS = range(150)
SMALL_LIMIT = 2.0          # per-instance budget; timeouts drop out of the comparison
ROOM_SEEDS = range(20)
ROOM_LIMIT = 10.0
OMEGAS = (0.0, 0.01, 0.1)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return emit


# -- shared runs ------------------------------------------------------------------


@cache
def small_suite():
    """(seed, instance, oracle result, {omega: solver result}) rows, plus oracle wall time."""
    rows, oracle_time = [], 0.0
    for seed in SMALL_SEEDS:
        inst = random_small_instance(seed)
        runs = {w: solve(inst, omega=w, time_limit=SMALL_LIMIT) for w in OMEGAS}
        t0 = time.perf_counter()
        oracle = brute_force_oracle(inst)
        oracle_time += time.perf_counter() - t0
        rows.append((seed, inst, oracle, runs))
    return rows, oracle_time


@cache
def room_suite():
    rows = []
    for seed in ROOM_SEEDS:
        inst = synthetic_instance(room_map(16, 4, seed=seed), 3, 6, seed=seed)
        runs = {w: solve(inst, omega=w, time_limit=ROOM_LIMIT) for w in OMEGAS + (math.inf,)}
        rows.append((seed, inst, runs))
    return rows


@cache
def mg_b_suite():
    rows = []
    for seed in ROOM_SEEDS:
        inst = synthetic_instance(room_map(16, 4, seed=seed), 3, 6, seed=seed, mode=MG)
        rows.append((seed, inst, solve_mg_b(inst, SolverConfig(omega=0.01, time_limit=ROOM_LIMIT))))
    return rows


def _first_joint_cost(inst):
    table = shortest_distances(inst.map, inst.key_vertices())
    return joint_stream(inst, table).next().cost


# -- criteria -------------------------------------------------------------------


def test_criterion_1_optimal_against_oracle(report):
    rows, oracle_time = small_suite()
    mismatches, compared, verdicts = [], 0, 0
    for seed, inst, oracle, runs in rows:
        r = runs[0.0]
        if r.status == SOLVED and oracle.solved:
            compared += 1
            if r.flowtime != oracle.flowtime:
                mismatches.append((seed, r.flowtime, oracle.flowtime))
        elif r.status == INFEASIBLE or oracle.status == "infeasible":
            verdicts += 1
            if not (r.status == INFEASIBLE and oracle.status == "infeasible"):
                mismatches.append((seed, r.status, oracle.status))
    total = oracle_time + sum(runs[0.0].stats.runtime for _, _, _, runs in rows)
    ok = len(rows) >= 100 and compared >= 100 and not mismatches and total < 60
    report(1, ok, f"{compared} optimal matches, {verdicts} infeasible verdicts, "
                  f"mismatches={mismatches}, time={total:.1f}s")
    assert ok


def test_criterion_2_bounded_suboptimality(report):
    rows, _ = small_suite()
    bad, checked = [], 0
    for seed, inst, oracle, runs in rows:
        for w in (0.01, 0.1):
            r = runs[w]
            if r.status != SOLVED:
                continue
            if validate_solution(inst, r.paths):
                bad.append((seed, w, "invalid"))
            if oracle.solved:
                checked += 1
                if r.flowtime > (1 + w) * oracle.flowtime:
                    bad.append((seed, w, r.flowtime, oracle.flowtime))
    ok = checked >= 200 and not bad
    report(2, ok, f"{checked} bounded runs, failures={bad}")
    assert ok


def _random_matrix(rng, n_tasks, open_end):
    n = n_tasks + 2
    m = rng.integers(1, 12, size=(n, n)).tolist()
    for i in range(n):
        m[i][i] = 0
    if open_end:
        for i in range(n):
            m[i][n - 1] = 0
            m[n - 1][i] = math.inf
        m[n - 1][n - 1] = 0
    return CostMatrix(m, open_end=open_end)


def test_criterion_3_kbest_exactness(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    failures, matrices = [], 0
    for trial in range(60):
        n_tasks = int(rng.integers(0, 7))
        m = _random_matrix(rng, n_tasks, bool(trial % 2))
        ref = sorted(c for c, _ in all_orders(m.costs, m.open_end))
        kb = SingleAgentKBest(m)
        got = [kb.get(k) for k in range(1, len(ref) + 1)]
        costs = [s.cost for s in got]
        if costs != ref or len({s.nodes for s in got}) != len(ref) or kb.get(len(ref) + 1) is not None:
            failures.append(("single", trial))
        matrices += 1
    for trial in range(30):
        n_agents = int(rng.integers(1, 4))
        mats = [_random_matrix(rng, int(rng.integers(0, 4)), bool(rng.integers(2))) for _ in range(n_agents)]
        stream = JointKBestStream([SingleAgentKBest(m) for m in mats])
        ref = sorted(sum(p) for p in itertools.product(
            *[[c for c, _ in all_orders(m.costs, m.open_end)] for m in mats]))[:20]
        got = []
        while len(got) < 20 and (j := stream.next()) is not None:
            got.append(j.cost)
        if got != ref:
            failures.append(("joint", trial))
    elapsed = time.perf_counter() - t0
    ok = matrices >= 50 and not failures and elapsed < 30
    report(3, ok, f"{matrices} matrices + 30 joint streams, failures={failures}, time={elapsed:.1f}s")
    assert ok


def test_criterion_4_omega_trend(report):
    rows = room_suite()
    both = [(seed, runs) for seed, _, runs in rows if all(runs[w].status == SOLVED for w in OMEGAS)]
    roots = [float(np.mean([runs[w].stats.roots_generated for _, runs in both])) for w in OMEGAS]
    calls = [float(np.mean([runs[w].stats.tsp_calls for _, runs in both])) for w in OMEGAS]
    single = [seed for seed, _, runs in rows
              if runs[math.inf].status == SOLVED and runs[math.inf].stats.roots_generated != 1]
    inf_solved = sum(runs[math.inf].status == SOLVED for _, _, runs in rows)
    trend = all(a >= b for a, b in zip(roots, roots[1:])) and all(a >= b for a, b in zip(calls, calls[1:]))
    ok = len(both) > 0 and trend and not single and inf_solved > 0
    report(4, ok, f"{len(both)}/20 solved at every omega; roots={[round(x, 2) for x in roots]} "
                  f"tsp_calls={[round(x, 2) for x in calls]}; omega=inf multi-root={single}")
    assert ok


def test_criterion_5_sqr(report):
    rows, _ = small_suite()
    bad, n = [], 0
    for seed, inst, _, runs in rows:
        lb = jtsp_lower_bound(inst)
        for w, r in runs.items():
            if r.status != SOLVED:
                continue
            sqr = compute_sqr(lb, r.flowtime)
            n += 1
            if not 0 < sqr <= 1 and not (lb == r.flowtime == 0):
                bad.append((seed, w, sqr))
            if w == 0.0 and (lb != _first_joint_cost(inst) or r.flowtime * sqr != pytest.approx(lb, abs=1e-9)):
                bad.append((seed, "lb", lb, r.flowtime))
    for seed, inst, runs in room_suite():
        lb = jtsp_lower_bound(inst)
        for w, r in runs.items():
            if r.status == SOLVED:
                n += 1
                if not 0 < compute_sqr(lb, r.flowtime) <= 1:
                    bad.append(("room", seed, w))
    b_sqr = []
    for seed, inst, r in mg_b_suite():
        if r.status == SOLVED:
            s = compute_sqr(jtsp_lower_bound(inst), r.flowtime)
            n += 1
            b_sqr.append(s)
            if not 0 < s <= 1:
                bad.append(("mg-b", seed, s))
    mean_b = float(np.mean(b_sqr)) if b_sqr else float("nan")
    soft = mean_b >= 0.80
    if not soft:
        warnings.warn(f"mean SQR of variant B is {mean_b:.3f}, below the 0.80 expectation")
    ok = not bad
    report(5, ok, f"{n} solved runs in (0, 1], failures={bad}; variant B mean SQR={mean_b:.3f} "
                  f"over {len(b_sqr)}/20 solved (soft >= 0.80: {'met' if soft else 'REVIEW'})")
    assert ok


def test_criterion_6_validator(report):
    rows, _ = small_suite()
    outputs = [(inst, r) for _, inst, _, runs in rows for r in runs.values() if r.status == SOLVED]
    outputs += [(inst, r) for _, inst, runs in room_suite() for r in runs.values() if r.status == SOLVED]
    outputs += [(inst, r) for _, inst, r in mg_b_suite() if r.status == SOLVED]
    invalid = sum(bool(validate_solution(inst, r.paths)) for inst, r in outputs)
    rng = np.random.default_rng(6)
    total, missed, kinds = 0, [], {}
    for seed, inst, _, runs in rows:
        r = runs[0.0]
        if r.status != SOLVED:
            continue
        for name, bad, kind in mutations(inst, r.paths, rng):
            total += 1
            kinds[kind] = kinds.get(kind, 0) + 1
            if kind not in {v.kind for v in validate_solution(inst, bad)}:
                missed.append((seed, name))
    ok = invalid == 0 and total >= 200 and not missed
    report(6, ok, f"{len(outputs) - invalid}/{len(outputs)} outputs valid; {total} mutations, "
                  f"missed={missed[:5]}; by kind={dict(sorted(kinds.items()))}")
    assert ok


def test_criterion_7_low_level(report):
    t0 = time.perf_counter()
    failures, n = [], 0
    for seed in range(300):
        g, targets, cons = random_ll_query(seed)
        if any(c.kind == "vertex" and c.u == targets[0] and c.t == 0 for c in cons):
            continue
        n += 1
        ref = spacetime_bfs(g, targets, list(cons), 1)
        p = low_level_search(g, TaskSequence.from_targets(targets, 1), cons)
        if (p is None) != (ref is None) or (p is not None and p.cost != ref):
            failures.append((seed, None if p is None else p.cost, ref))
    elapsed = time.perf_counter() - t0
    ok = n >= 200 and not failures and elapsed < 10
    report(7, ok, f"{n} queries, failures={failures}, time={elapsed:.2f}s")
    assert ok


GOLDEN = {
    # name: (width, height, blocked count, blocked cells, scenario rows)
    "empty-8-8": (8, 8, 0, [], 8),
    "random-8-8": (8, 8, 9, [(1, 4)], 8),
    "room-9-9": (9, 9, 13, [(4, 4), (0, 4), (8, 4), (4, 0)], 8),
}


def test_criterion_8_golden_files(report):
    problems = []
    for name, (w, h, nb, blocked, n_rows) in GOLDEN.items():
        text = (FIXTURES / f"{name}.map").read_text()
        g = parse_map(text)
        if (g.width, g.height, len(g.blocked)) != (w, h, nb):
            problems.append((name, "shape"))
        if any(g.passable(b) for b in blocked):
            problems.append((name, "blocked cells"))
        if parse_map(serialize_map(g)) != g:
            problems.append((name, "map round trip"))
        scen = (FIXTURES / f"{name}.scen").read_text()
        entries = parse_scenario(scen)
        if len(entries) != n_rows:
            problems.append((name, "row count"))
        for line, e in zip(scen.splitlines()[1:], entries):
            cols = line.split("\t")
            if cols[1] != f"{name}.map" or (int(cols[2]), int(cols[3])) != (w, h):
                problems.append((name, "header columns"))
            if e.start != (int(cols[5]), int(cols[4])) or e.goal != (int(cols[7]), int(cols[6])):
                problems.append((name, "coordinate order"))
            if grid_bfs(g, e.start).get(tuple(e.goal)) != float(cols[8]):
                problems.append((name, "optimal length"))
        if serialize_scenario(entries, f"{name}.map", g) != scen:
            problems.append((name, "scenario round trip"))
    ok = not problems
    report(8, ok, f"{len(GOLDEN)} map/scenario pairs, problems={problems}")
    assert ok
