#!/usr/bin/env python3
"""Run the full 400 m reference experiment: generate the preset scenario,
derive tables, sweep the deployment budget, and print the gap table.

Usage:
    python scripts/run_full_sweep.py --seed 0 --out runs/full
    python scripts/run_full_sweep.py --fast          # coarse sweep, ~1 min
"""

import argparse
import json
import sys
import time
from pathlib import Path

from backhaul_planner.cli import main as cli

FULL = {
    "solve": {"delta_c": 1.0, "n_lagrangian": 3},
    "search": {"n_outer": 2, "n_inner": 3, "n_div": 2, "n_swap": 80, "tenure_ban": 1, "tenure_station": 2},
}
FAST = {
    "solve": {"delta_c": 2.0, "n_lagrangian": 2},
    "search": {"n_outer": 1, "n_inner": 2, "n_div": 2, "n_swap": 40, "tenure_ban": 0, "tenure_station": 1},
}


def run() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/full")
    parser.add_argument("--fast", action="store_true", help="coarser budget steps and smaller search")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = out / "config.json"
    config.write_text(json.dumps(FAST if args.fast else FULL, indent=1))
    scenario = out / "scenario.json"

    started = time.time()
    for argv in (
        ["gen", "--preset", "paper-fig2", "--seed", str(args.seed), "--out", str(scenario)],
        ["derive", str(scenario)],
        ["solve", str(scenario), "--config", str(config), "--out", str(out), "--seed", str(args.seed), "--trace"],
        ["report", "--out", str(out)],
    ):
        rc = cli(argv)
        if rc != 0:
            return rc
    print(f"done in {time.time() - started:.0f}s -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
