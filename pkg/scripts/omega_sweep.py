"""Sweep the suboptimality bound on generated room maps and report search effort.

    python scripts/omega_sweep.py --instances 20 --agents 3 --tasks 6 --time-limit 10
"""
import argparse
import math

from ctscbs.harness import (RunRecord, compute_sqr, format_summary, jtsp_lower_bound, room_map,
                            summarize, synthetic_instance, write_csv)
from ctscbs.search import SOLVED, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--agents", type=int, default=3)
    ap.add_argument("--tasks", type=int, default=6)
    ap.add_argument("--size", type=int, default=16)
    ap.add_argument("--omegas", type=float, nargs="+", default=[0, 0.01, 0.1, math.inf])
    ap.add_argument("--time-limit", type=float, default=10.0)
    ap.add_argument("--csv", help="also write per-run rows here")
    args = ap.parse_args()

    records = []
    for seed in range(args.instances):
        inst = synthetic_instance(room_map(args.size, 4, seed=seed), args.agents, args.tasks, seed=seed)
        lb = jtsp_lower_bound(inst)
        for w in args.omegas:
            r = solve(inst, omega=w, time_limit=args.time_limit)
            st = r.stats
            records.append(RunRecord(
                f"room{seed}", f"room-{args.size}", str(seed), args.agents, args.tasks, "base", w, r.status,
                st.runtime, r.flowtime, lb, compute_sqr(lb, r.flowtime) if r.status == SOLVED else None,
                st.roots_generated, st.tsp_calls, st.hl_expansions))
            print(f"seed={seed:2d} omega={w:<5} {r.status:<10} roots={st.roots_generated:<4} "
                  f"tsp_calls={st.tsp_calls:<5} runtime={st.runtime:.2f}s", flush=True)
    print()
    print(format_summary(summarize(records, args.time_limit)))
    if args.csv:
        write_csv(records, args.csv)


if __name__ == "__main__":
    main()
