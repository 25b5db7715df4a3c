#!/usr/bin/env python3
"""Run every upstream mapping scheme at the shared fixed-load point.

All twelve schemes face the same offered load: 14 nodes, one content item
per node per minute, no retransmissions, 20 seeds each.  The output CSV
holds one row per (scheme, seed) and is the input for the per-scheme
latency and loss comparison.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from loricn.cli import sweep_plan
from loricn.experiments import sweep, sweep_csv

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = REPO_ROOT / "configs" / "sweeps" / "fixed-load-matrix.json"
DEFAULT_OUTPUT = REPO_ROOT / "results" / "fixed_load_matrix.csv"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=DEFAULT_CONFIG)
    parser.add_argument("--output", type=Path, default=DEFAULT_OUTPUT)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = parser.parse_args(argv)

    with open(args.config, encoding="utf-8") as fh:
        base, schemes, sizes, intervals = sweep_plan(json.load(fh))

    start = time.perf_counter()
    records = sweep(base, schemes, sizes, intervals, workers=args.workers)
    wall = time.perf_counter() - start

    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text(sweep_csv(records), encoding="utf-8")
    print(f"{args.output}: {len(records)} rows in {wall:.1f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
