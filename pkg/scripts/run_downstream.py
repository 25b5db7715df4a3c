#!/usr/bin/env python3
"""Sweep the two downstream delivery schemes over size and item interval.

The main grid crosses both downstream schemes with network sizes 7 to 56
and item intervals 30 to 240 s, retransmissions off.  A second small sweep
repeats the most loaded broadcast cells with Interest retransmissions on;
its rows go to a separate CSV because the metrics columns do not record
the retransmission setting.
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
CONFIG_DIR = REPO_ROOT / "configs" / "sweeps"
DEFAULT_OUTPUT_DIR = REPO_ROOT / "results"


def run_one(config: Path, output: Path, workers: int) -> None:
    with open(config, encoding="utf-8") as fh:
        base, schemes, sizes, intervals = sweep_plan(json.load(fh))
    start = time.perf_counter()
    records = sweep(base, schemes, sizes, intervals, workers=workers)
    wall = time.perf_counter() - start
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(sweep_csv(records), encoding="utf-8")
    print(f"{output}: {len(records)} rows in {wall:.1f} s", file=sys.stderr)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=CONFIG_DIR / "downstream.json")
    parser.add_argument(
        "--retx-config",
        type=Path,
        default=CONFIG_DIR / "downstream-retransmissions.json",
    )
    parser.add_argument("--output", type=Path, default=DEFAULT_OUTPUT_DIR / "downstream.csv")
    parser.add_argument(
        "--retx-output", type=Path, default=DEFAULT_OUTPUT_DIR / "downstream_retx.csv"
    )
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = parser.parse_args(argv)

    run_one(args.config, args.output, args.workers)
    run_one(args.retx_config, args.retx_output, args.workers)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
