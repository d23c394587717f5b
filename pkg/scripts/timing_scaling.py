#!/usr/bin/env python3
"""Wall time of one solve against problem size, with a log-log fit.

Full observability, so m = k * n exactly.  Each size is timed over a few
seeds and the median kept.

    python scripts/timing_scaling.py --sizes 60 120 240 480 --repeats 3
"""
import argparse
import sys
import time

import numpy as np

from mixer.evaluation import SyntheticSpec, generate_instance
from mixer.solver import solve


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[60, 120, 240, 480])
    ap.add_argument("--views", type=int, default=4)
    ap.add_argument("--mismatch", type=float, default=0.25)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    ms, med = [], []
    print(f"{'m':>5} {'median s':>9} {'outer':>6} {'inner':>6}")
    for m in args.sizes:
        if m % args.views:
            ap.error(f"size {m} is not a multiple of --views {args.views}")
        times, outer, inner = [], [], []
        for seed in range(args.repeats):
            S, _ = generate_instance(SyntheticSpec(m // args.views, args.views, 1.0, args.mismatch, seed))
            t0 = time.perf_counter()
            _, _, report = solve(S)
            times.append(time.perf_counter() - t0)
            outer.append(report.outer_iterations)
            inner.append(report.total_inner_iterations)
        ms.append(m)
        med.append(float(np.median(times)))
        print(f"{m:5d} {med[-1]:9.3f} {np.median(outer):6.0f} {np.median(inner):6.0f}")
    if len(ms) > 1:
        slope = np.polyfit(np.log(ms), np.log(med), 1)[0]
        print(f"fit exponent {slope:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
