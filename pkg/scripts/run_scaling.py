#!/usr/bin/env python3
"""Scale network size under a tight request rate and record the collapse.

One contention-based scheme and two fully reserved schemes run at a 30 s
mean content interval with retransmissions on, across 14 to 112 nodes.
Reserved schemes whose slot demand exceeds the slot-channel grid report
status not_operable instead of metrics.
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
DEFAULT_CONFIG = REPO_ROOT / "configs" / "sweeps" / "scaling.json"
DEFAULT_OUTPUT = REPO_ROOT / "results" / "scaling.csv"


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
