#!/usr/bin/env python3
"""Optimality gap of MIXER against exhaustive search on small instances.

Reports the share of exact optima and the gap distribution on synthetic
instances with m <= 10, then the two-view hit rate against the matching
oracle, split by the first outer iteration's outcome.

    python scripts/gap_study.py --instances 200
"""
import argparse
import sys

import numpy as np

from mixer.core import ViewPartition, validate_affinity
from mixer.evaluation import SyntheticSpec, generate_instance
from mixer.oracles import MAX_MIQP_SIZE, brute_force_miqp, optimality_gap
from mixer.solver import solve


def synthetic(rng):
    while True:
        spec = SyntheticSpec(int(rng.integers(2, 6)), int(rng.integers(2, 5)), float(rng.uniform(0.3, 1.0)),
                             float(rng.uniform(0.0, 0.5)), int(rng.integers(2**31)))
        S, _ = generate_instance(spec)
        if 2 <= S.m <= MAX_MIQP_SIZE:
            return S


def two_view(rng, max_card):
    a, b = int(rng.integers(1, max_card + 1)), int(rng.integers(1, max_card + 1))
    S = np.eye(a + b)
    S[:a, a:] = rng.random((a, b))
    S[a:, :a] = S[:a, a:].T
    return validate_affinity(S, ViewPartition((a, b)))


def study(name, make, count):
    gaps, rel, outer = [], [], []
    for _ in range(count):
        S = make()
        _, f = brute_force_miqp(S)
        _, _, report = solve(S)
        g = optimality_gap(report.miqp_objective, f)
        gaps.append(g)
        rel.append(0.0 if g <= 1e-6 else g / f)
        outer.append(report.outer_iterations)
    gaps, rel, outer = np.array(gaps), np.array(rel), np.array(outer)
    exact = gaps <= 1e-6
    print(f"{name}: {count} instances")
    print(f"  exact optimum      {exact.mean():.3f}")
    print(f"  min gap            {gaps.min():.2e}")
    print(f"  median rel. gap    {np.median(rel):.4f}")
    print(f"  90th pct rel. gap  {np.quantile(rel, 0.9):.4f}")
    one = outer == 1
    if one.any() and (~one).any():
        print(f"  exact | 1 outer    {exact[one].mean():.3f} ({one.sum()})")
        print(f"  exact | >1 outer   {exact[~one].mean():.3f} ({(~one).sum()})")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    study("synthetic grid, m <= 10", lambda: synthetic(rng), args.instances)
    study("two views, m_i <= 4", lambda: two_view(rng, 4), args.instances)
    return 0


if __name__ == "__main__":
    sys.exit(main())
