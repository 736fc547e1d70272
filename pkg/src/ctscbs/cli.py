"""Command-line entry points.

Exit codes: 0 solved/ok, 1 usage or parse error, 2 infeasible, 3 timeout.
Set CTSCBS_LOG (e.g. ``INFO``, ``DEBUG``) for log output on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .adaptations import VARIANTS, AdaptationConfig, solve_variant
from .harness import (BenchConfig, format_summary, plot_summary, read_csv, run_benchmark,
                      summarize, write_csv)
from .oracle import brute_force_oracle
from .search import INFEASIBLE, SOLVED, TIMEOUT, SolverConfig, load_solution_paths
from .sequencing import SingleAgentKBest, build_cost_matrix, joint_stream
from .validation import validate_solution
from .world import Instance, shortest_distances

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_TIMEOUT = 0, 1, 2, 3
STATUS_EXIT = {SOLVED: EXIT_OK, INFEASIBLE: EXIT_INFEASIBLE, TIMEOUT: EXIT_TIMEOUT}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _omega(text: str) -> float:
    try:
        w = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not w >= 0:
        raise argparse.ArgumentTypeError(f"omega must be >= 0, got {text}")
    return w


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _load_instance(path) -> Instance:
    try:
        return Instance.from_json(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}")
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot parse instance {path}: {exc}")


def cmd_solve(args) -> int:
    instance = _load_instance(args.instance)
    config = AdaptationConfig(args.variant, SolverConfig(omega=args.omega, time_limit=args.time_limit,
                                                         tie_break=args.tie_break))
    try:
        result = solve_variant(instance, config)
    except ValueError as exc:
        raise UsageError(str(exc))
    text = result.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    st = result.stats
    flow = "-" if result.flowtime is None else result.flowtime
    print(f"{result.status} flowtime={flow} runtime={st.runtime:.3f}s "
          f"roots={st.roots_generated} tsp_calls={st.tsp_calls}",
          file=sys.stderr if not args.out else sys.stdout)
    return STATUS_EXIT[result.status]


def cmd_bench(args) -> int:
    try:
        config = BenchConfig.load(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read {args.config}: {exc}")
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config {args.config}: {exc}")
    if args.workers is not None:
        config.workers = args.workers
    missing = config.missing_files()
    if missing:
        raise UsageError("missing files:\n  " + "\n  ".join(missing))
    records = run_benchmark(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(records, out_dir / "runs.csv")
    print(format_summary(summarize(records, config.time_limit)))
    errored = [r for r in records if r.status in ("error", "invalid")]
    return EXIT_USAGE if errored else EXIT_OK


def cmd_validate(args) -> int:
    instance = _load_instance(args.instance)
    try:
        paths = load_solution_paths(Path(args.solution).read_text())
        violations = validate_solution(instance, paths)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot check {args.solution}: {exc}")
    for v in violations:
        print(v)
    print(f"{len(violations)} violation(s)")
    return EXIT_OK if not violations else EXIT_INFEASIBLE


def cmd_oracle(args) -> int:
    instance = _load_instance(args.instance)
    res = brute_force_oracle(instance, horizon=args.horizon)
    flow = "-" if res.flowtime is None else res.flowtime
    print(f"{res.status} flowtime={flow} expanded={res.expanded}")
    return {"optimal": EXIT_OK, "infeasible": EXIT_INFEASIBLE}.get(res.status, EXIT_TIMEOUT)


def cmd_sequences(args) -> int:
    instance = _load_instance(args.instance)
    table = shortest_distances(instance.map, instance.key_vertices())
    shown = 0
    if args.agent is not None:
        if not 1 <= args.agent <= instance.n_agents:
            raise UsageError(f"agent must be in 1..{instance.n_agents}")
        ranker = SingleAgentKBest(build_cost_matrix(instance, args.agent, table))
        for k in range(1, args.k + 1):
            seq = ranker.get(k)
            if seq is None:
                break
            shown += 1
            targets = " ".join(f"({r},{c})" for r, c in seq.targets)
            print(f"{k}\tcost={_num(seq.cost)}\t{targets}")
    else:
        stream = joint_stream(instance, table)
        for k in range(1, args.k + 1):
            joint = stream.next()
            if joint is None:
                break
            shown += 1
            orders = " | ".join(",".join(str(t) for t in s.task_ids if t is not None) or "-"
                                for s in joint.sequences)
            print(f"{k}\tcost={_num(joint.cost)}\tranks={list(joint.priority)}\ttasks={orders}")
    if shown < args.k:
        print(f"exhausted after {shown} sequence(s)")
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        records = read_csv(args.csv)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read {args.csv}: {exc}")
    plot_summary(records, args.time_limit, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _num(x):
    return "inf" if x == math.inf else (int(x) if float(x).is_integer() else x)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ctscbs", description="Multi-agent path finding with task sequencing.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve an instance file (JSON)")
    s.add_argument("instance")
    s.add_argument("--omega", type=_omega, default=0.0, help="suboptimality bound; 'inf' for one tree")
    s.add_argument("--variant", choices=VARIANTS, default="base")
    s.add_argument("--time-limit", type=_positive, default=math.inf, help="seconds")
    s.add_argument("--tie-break", choices=("tree-node", "conflicts"), default="tree-node")
    s.add_argument("--out", help="solution file (default: stdout)")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a benchmark config (JSON)")
    b.add_argument("config")
    b.add_argument("--out-dir", default="bench_out")
    b.add_argument("--workers", type=int)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("validate", help="check a solution file against an instance")
    v.add_argument("instance")
    v.add_argument("solution")
    v.set_defaults(func=cmd_validate)

    o = sub.add_parser("oracle", help="exhaustive optimum for a tiny instance")
    o.add_argument("instance")
    o.add_argument("--horizon", type=int)
    o.set_defaults(func=cmd_oracle)

    q = sub.add_parser("sequences", help="list ranked task sequences")
    q.add_argument("instance")
    q.add_argument("--agent", type=int, help="single agent id; joint sequences if omitted")
    q.add_argument("--k", type=int, default=5)
    q.set_defaults(func=cmd_sequences)

    pl = sub.add_parser("plot", help="render a runs CSV to SVG")
    pl.add_argument("csv")
    pl.add_argument("--out", default="summary.svg")
    pl.add_argument("--time-limit", type=_positive, default=180.0,
                    help="runtime charged to unsolved runs")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    level = os.environ.get("CTSCBS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "k", 1) < 1:
            raise UsageError("--k must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:      # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
