#!/usr/bin/env python3
"""Record per-transaction completion times for two contrasting schemes.

Runs a pull scheme and the push scheme at a 30 s mean content interval
with retransmissions on, keeping the full transcript.  Emits the metrics
CSV plus a JSONL file with one line per transaction; the JSONL feeds the
completion-time distribution plot, where retried transactions show up as
a step one retransmission timeout after the first attempt.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from loricn.cli import sweep_plan
from loricn.experiments import sweep, sweep_csv, transaction_lines

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = REPO_ROOT / "configs" / "sweeps" / "completion-trace.json"
DEFAULT_OUTPUT = REPO_ROOT / "results" / "completion_times.csv"
DEFAULT_TRANSACTIONS = REPO_ROOT / "results" / "completion_times.jsonl"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=DEFAULT_CONFIG)
    parser.add_argument("--output", type=Path, default=DEFAULT_OUTPUT)
    parser.add_argument("--transactions", type=Path, default=DEFAULT_TRANSACTIONS)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = parser.parse_args(argv)

    with open(args.config, encoding="utf-8") as fh:
        base, schemes, sizes, intervals = sweep_plan(json.load(fh))

    start = time.perf_counter()
    records = sweep(base, schemes, sizes, intervals, workers=args.workers)
    wall = time.perf_counter() - start

    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text(sweep_csv(records), encoding="utf-8")
    args.transactions.parent.mkdir(parents=True, exist_ok=True)
    with open(args.transactions, "w", encoding="utf-8") as fh:
        for line in transaction_lines(records):
            fh.write(line + "\n")
    lines = sum(r.produced for r in records)
    print(
        f"{args.output} and {args.transactions}: "
        f"{len(records)} rows, {lines} transactions in {wall:.1f} s",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
