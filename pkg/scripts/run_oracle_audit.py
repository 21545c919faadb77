#!/usr/bin/env python3
"""Audit the solver against the exhaustive oracle on seeded tiny instances.

Prints the fraction of instances whose full front matches the exact one and
lists every mismatch.

Usage:
    python scripts/run_oracle_audit.py --instances 30
"""

import argparse
import random
import sys
import time

sys.path.insert(0, "tests")  # instance builders live with the test suite

from backhaul_planner import SearchParams, exact_front, solve
from backhaul_planner.pareto import SolveParams

GENEROUS = SolveParams(
    n_lagrangian=10,
    search=SearchParams(n_outer=50, n_inner=50, n_div=2, tenure_ban=7, tenure_station=10, seed=0),
)


def run() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", type=int, default=30)
    parser.add_argument("--base-seed", type=int, default=2000)
    args = parser.parse_args()

    from util import tiny_instance

    started = time.time()
    hits = 0
    for n in range(args.instances):
        scenario, tables = tiny_instance(args.base_seed + n)
        result = solve(scenario, tables, params=GENEROUS)
        points = [(e.objectives.cost, e.objectives.weighted_uncovered) for e in result.front]
        exact = exact_front(scenario, tables)
        if points == exact:
            hits += 1
        else:
            print(f"mismatch on seed {args.base_seed + n}:")
            print(f"  solver: {points}")
            print(f"  oracle: {exact}")
    print(f"{hits}/{args.instances} exact front matches in {time.time() - started:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(run())
