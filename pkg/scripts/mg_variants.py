"""Compare the multi-goal variants (A, B, C and the one-tree baseline) on generated room maps.

    python scripts/mg_variants.py --instances 20 --omega 0.01 --time-limit 10
"""
import argparse

from ctscbs.adaptations import AdaptationConfig, solve_variant
from ctscbs.harness import (RunRecord, compute_sqr, format_summary, jtsp_lower_bound, room_map,
                            summarize, synthetic_instance, write_csv)
from ctscbs.search import SOLVED, SolverConfig
from ctscbs.world import MG


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--agents", type=int, default=3)
    ap.add_argument("--tasks", type=int, default=6)
    ap.add_argument("--size", type=int, default=16)
    ap.add_argument("--omega", type=float, default=0.01)
    ap.add_argument("--variants", nargs="+", default=["A", "B", "C", "SCBS"])
    ap.add_argument("--time-limit", type=float, default=10.0)
    ap.add_argument("--csv")
    args = ap.parse_args()

    records = []
    for seed in range(args.instances):
        inst = synthetic_instance(room_map(args.size, 4, seed=seed), args.agents, args.tasks, seed=seed, mode=MG)
        lb = jtsp_lower_bound(inst)
        for v in args.variants:
            cfg = AdaptationConfig(v, SolverConfig(omega=args.omega, time_limit=args.time_limit))
            r = solve_variant(inst, cfg)
            sqr = compute_sqr(lb, r.flowtime) if r.status == SOLVED else None
            st = r.stats
            records.append(RunRecord(
                f"room{seed}", f"room-{args.size}", str(seed), args.agents, args.tasks, v, args.omega, r.status,
                st.runtime, r.flowtime, lb, sqr, st.roots_generated, st.tsp_calls, st.hl_expansions, r.phase))
            shown = "-" if sqr is None else f"{sqr:.3f}"
            print(f"seed={seed:2d} {v:<5} {r.status:<10} flowtime={r.flowtime} sqr={shown} "
                  f"runtime={st.runtime:.2f}s", flush=True)
    print()
    print(format_summary(summarize(records, args.time_limit)))
    if args.csv:
        write_csv(records, args.csv)


if __name__ == "__main__":
    main()
