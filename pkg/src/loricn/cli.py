"""Command line front end: single runs, sweeps, and the analytic helpers.

Subcommands
-----------
run
    Execute one scenario (all replications) from a JSON config and emit the
    metrics CSV, optionally with a per-transaction JSONL transcript.
sweep
    Execute a scheme x size x interval grid around a base scenario and emit
    one combined CSV.
queue-model
    Print the stationary occupancy and mean wait of the slotted-service
    queue as JSON.
toa
    Print the airtime in seconds of one frame for the given radio settings.

Run and sweep exit 0 even when individual cells are not operable; those
rows are results, not failures.  Bad configs, unreadable files, and invalid
parameter combinations print a message to stderr and exit 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .errors import ConfigError, QueueModelError
from .experiments import (
    ScenarioConfig,
    run_replications,
    scenario_from_dict,
    scenario_from_json,
    sweep,
    sweep_csv,
    transaction_lines,
)
from .phy import PhyConfig, time_on_air
from .queueing import DEFAULT_CLIP, QueueModelParams, waiting_time

GRID_AXES = ("schemes", "n_nodes", "intervals_s")


def _default_workers() -> int:
    getter = getattr(os, "process_cpu_count", None) or os.cpu_count
    return getter() or 1


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def sweep_plan(raw) -> tuple[ScenarioConfig, list[str], list[int], list[float]]:
    """Split a sweep config into its base scenario and the three grid axes.

    The base must be a scenario object; grid axes are optional and default
    to the base's own value, so a sweep config with an empty grid is the
    same as a single run.  Axis values also backfill a base that omits the
    corresponding scenario field.
    """
    if not isinstance(raw, dict):
        raise ConfigError("sweep config must be a JSON object")
    unknown = sorted(set(raw) - {"base", "grid"})
    if unknown:
        raise ConfigError(f"unknown sweep config fields: {', '.join(unknown)}")
    base_raw = raw.get("base")
    if not isinstance(base_raw, dict):
        raise ConfigError("sweep config needs a 'base' scenario object")
    grid = raw.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("'grid' must be an object of axis lists")
    unknown = sorted(set(grid) - set(GRID_AXES))
    if unknown:
        raise ConfigError(f"unknown grid axes: {', '.join(unknown)}")
    for axis in GRID_AXES:
        values = grid.get(axis)
        if values is not None and (not isinstance(values, list) or not values):
            raise ConfigError(f"grid axis '{axis}' must be a non-empty list")

    base_raw = dict(base_raw)
    base_raw.setdefault("name", "sweep")
    if grid.get("schemes"):
        base_raw.setdefault("scheme", grid["schemes"][0])
    if grid.get("n_nodes"):
        base_raw.setdefault("n_nodes", grid["n_nodes"][0])
    if grid.get("intervals_s"):
        base_raw.setdefault("content_interval_mean_s", grid["intervals_s"][0])
    base = scenario_from_dict(base_raw)

    schemes = list(grid.get("schemes") or [base.scheme])
    sizes = list(grid.get("n_nodes") or [base.n_nodes])
    intervals = list(grid.get("intervals_s") or [base.content_interval_mean_s])
    return base, schemes, sizes, intervals


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = scenario_from_json(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.transactions is not None:
        cfg = dataclasses.replace(cfg, transcript=True)
    records = run_replications(cfg)
    _emit(sweep_csv(records), args.output)
    if args.transactions is not None:
        _emit("".join(line + "\n" for line in transaction_lines(records)), args.transactions)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    base, schemes, sizes, intervals = sweep_plan(_load_json(args.config))
    if args.seed is not None:
        base = dataclasses.replace(base, seed=args.seed)
    records = sweep(base, schemes, sizes, intervals, workers=args.workers)
    _emit(sweep_csv(records), args.output)
    return 0


def _cmd_queue_model(args: argparse.Namespace) -> int:
    params = QueueModelParams(
        arrival_rate=args.lam, service_interval_s=args.service_interval_s, clip=args.clip
    )
    result = waiting_time(params)
    payload = {
        "arrival_rate": params.arrival_rate,
        "service_interval_s": params.service_interval_s,
        "load": params.load,
        "mean_queue_at_service": result.mean_queue_at_service,
        "mean_queue": result.mean_queue,
        "mean_wait_s": result.mean_wait_s,
    }
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_toa(args: argparse.Namespace) -> int:
    ldro = {"auto": None, "on": True, "off": False}[args.ldro]
    cfg = PhyConfig(
        spreading_factor=args.sf,
        bandwidth_hz=args.bw,
        coding_rate=args.cr,
        preamble_symbols=args.preamble,
        low_data_rate=ldro,
    )
    print(f"{time_on_air(args.bytes, cfg):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loricn",
        description="Simulate ICN naming schemes over a LoRa DSME link layer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario from a JSON config")
    run.add_argument("--config", required=True, help="scenario JSON file")
    run.add_argument("--output", default=None, help="CSV path (default stdout)")
    run.add_argument("--seed", type=int, default=None, help="override the base seed")
    run.add_argument(
        "--transactions",
        default=None,
        metavar="PATH",
        help="also write a per-transaction JSONL transcript",
    )
    run.set_defaults(func=_cmd_run)

    swp = sub.add_parser("sweep", help="run a scheme x size x interval grid")
    swp.add_argument("--config", required=True, help="sweep JSON file with base and grid")
    swp.add_argument("--output", default=None, help="CSV path (default stdout)")
    swp.add_argument("--seed", type=int, default=None, help="override the base seed")
    swp.add_argument(
        "--workers",
        type=int,
        default=_default_workers(),
        help="worker processes (default: available parallelism)",
    )
    swp.set_defaults(func=_cmd_sweep)

    qm = sub.add_parser("queue-model", help="analytic occupancy and wait of the slotted queue")
    qm.add_argument(
        "--lambda", dest="lam", type=float, required=True, help="arrival rate in packets/s"
    )
    qm.add_argument(
        "--T",
        dest="service_interval_s",
        type=float,
        required=True,
        help="seconds between service opportunities",
    )
    qm.add_argument("--clip", type=int, default=DEFAULT_CLIP, help="queue state cap")
    qm.set_defaults(func=_cmd_queue_model)

    toa = sub.add_parser("toa", help="airtime of one frame in seconds")
    toa.add_argument("--bytes", type=int, required=True, help="MAC payload size in bytes")
    toa.add_argument("--sf", type=int, default=7, help="spreading factor 7..12")
    toa.add_argument("--bw", type=int, default=125_000, help="bandwidth in Hz")
    toa.add_argument("--cr", type=int, default=1, help="coding rate index 1..4 (4/5..4/8)")
    toa.add_argument("--preamble", type=int, default=8, help="preamble length in symbols")
    toa.add_argument(
        "--ldro",
        choices=("auto", "on", "off"),
        default="auto",
        help="low data rate optimisation (auto follows the symbol time rule)",
    )
    toa.set_defaults(func=_cmd_toa)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, QueueModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
