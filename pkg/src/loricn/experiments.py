"""Scenario runner and sweep harness.

A scenario names a mapping scheme, a population, and a traffic rate;
running it yields one metrics record per replication seed.  Sweeps cross
schemes x sizes x intervals, keep going when a cell's static schedule
does not fit (the cell is reported as not operable), and serialize to a
CSV whose bytes depend only on the configuration and seeds.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Iterable, Iterator, Sequence

from .convergence import Network, NetworkParams, Transaction
from .errors import ConfigError, ScheduleInfeasibleError
from .mac import SuperframeConfig
from .phy import PhyConfig
from .schemes import preset

DIRECTION_LABELS = {
    "node-to-gateway": "upstream",
    "gateway-to-node": "downstream",
}

DEFAULT_DURATION_FLOOR_S = 7200.0
DEFAULT_REPLICATIONS = 20

CSV_COLUMNS = (
    "scenario",
    "scheme",
    "n_nodes",
    "interval_s",
    "seed",
    "produced",
    "delivered",
    "lost",
    "pending",
    "avg_latency_s",
    "max_latency_s",
    "loss_pct",
    "success_pct",
    "radio_on_s_mean",
    "queue_drops",
    "duty_denials",
    "status",
)


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    """Everything a single experiment cell needs, seeds included."""

    name: str
    scheme: str
    n_nodes: int
    content_interval_mean_s: float
    duration_s: float | None = None
    seed: int = 0
    replications: int = DEFAULT_REPLICATIONS
    retransmissions: bool = False
    retx_timeout_s: float | None = None
    retx_max: int = 3
    link_acks: bool = True
    direction: str | None = None
    superframe: SuperframeConfig = SuperframeConfig()
    phy: PhyConfig = PhyConfig()
    queue_capacity: int = 8
    cs_capacity: int = 1024
    registration_lifetime_s: float = 3600.0
    node_pit_lifetime_s: float = 600.0
    gateway_lifetime_per_node_s: float = 10.0
    upstream_payload_bytes: int = 32
    downstream_payload_bytes: int = 2
    transcript: bool = False

    def __post_init__(self) -> None:
        if self.n_nodes < 1:
            raise ConfigError("n_nodes: a network needs at least one node")
        if self.content_interval_mean_s <= 0:
            raise ConfigError("content_interval_mean_s: must be positive")
        if self.replications < 1:
            raise ConfigError("replications: at least one replication is required")
        scheme = preset(self.scheme)
        if self.direction is not None:
            mapped = DIRECTION_LABELS.get(self.direction)
            if mapped is None:
                raise ConfigError(
                    f"direction: {self.direction!r} is not one of {sorted(DIRECTION_LABELS)}"
                )
            if mapped != scheme.direction:
                raise ConfigError(
                    f"direction: {self.direction!r} contradicts scheme {self.scheme!r}"
                )
        if self.effective_duration_s < 10.0 * self.content_interval_mean_s:
            raise ConfigError(
                "duration_s: must cover at least ten mean content intervals"
            )

    @property
    def effective_duration_s(self) -> float:
        if self.duration_s is not None:
            return self.duration_s
        return max(DEFAULT_DURATION_FLOOR_S, 100.0 * self.content_interval_mean_s)

    def network_params(self, seed: int) -> NetworkParams:
        return NetworkParams(
            n_nodes=self.n_nodes,
            scheme=preset(self.scheme),
            content_interval_mean_s=self.content_interval_mean_s,
            duration_s=self.effective_duration_s,
            seed=seed,
            retransmissions=self.retransmissions,
            retx_timeout_s=self.retx_timeout_s,
            retx_max=self.retx_max,
            link_acks=self.link_acks,
            superframe=self.superframe,
            phy=self.phy,
            upstream_payload_bytes=self.upstream_payload_bytes,
            downstream_payload_bytes=self.downstream_payload_bytes,
            registration_lifetime_s=self.registration_lifetime_s,
            node_pit_lifetime_s=self.node_pit_lifetime_s,
            gateway_lifetime_per_node_s=self.gateway_lifetime_per_node_s,
            queue_capacity=self.queue_capacity,
            cs_capacity=self.cs_capacity,
        )


@dataclass(frozen=True, slots=True)
class MetricsRecord:
    """Aggregates for one (scenario, seed) run, warm-up excluded."""

    scenario: str
    scheme: str
    n_nodes: int
    interval_s: float
    seed: int
    status: str
    produced: int
    delivered: int
    lost: int
    pending: int
    avg_latency_s: float | None
    max_latency_s: float | None
    loss_pct: float | None
    success_pct: float | None
    radio_on_s_mean: float | None
    queue_drops: int
    duty_denials: int
    transactions: tuple[Transaction, ...] = ()

    @property
    def pending_pct(self) -> float | None:
        if self.produced == 0:
            return None
        return 100.0 * self.pending / self.produced


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> MetricsRecord:
    """One replication; an unschedulable cell reports as data, not an error."""
    run_seed = cfg.seed if seed is None else seed
    try:
        network = Network(cfg.network_params(run_seed))
    except ScheduleInfeasibleError:
        return MetricsRecord(
            scenario=cfg.name,
            scheme=cfg.scheme,
            n_nodes=cfg.n_nodes,
            interval_s=cfg.content_interval_mean_s,
            seed=run_seed,
            status="not_operable",
            produced=0,
            delivered=0,
            lost=0,
            pending=0,
            avg_latency_s=None,
            max_latency_s=None,
            loss_pct=None,
            success_pct=None,
            radio_on_s_mean=None,
            queue_drops=0,
            duty_denials=0,
        )
    result = network.run()
    warmup = cfg.superframe.beacon_interval_s
    counted = tuple(t for t in result.transactions if t.created_s >= warmup)
    delivered = sum(1 for t in counted if t.status == "delivered")
    lost = sum(1 for t in counted if t.status == "lost")
    pending = sum(1 for t in counted if t.status == "pending")
    latencies = [t.latency_s for t in counted if t.status == "delivered"]
    produced = len(counted)
    radio = result.radio_on_by_node
    return MetricsRecord(
        scenario=cfg.name,
        scheme=cfg.scheme,
        n_nodes=cfg.n_nodes,
        interval_s=cfg.content_interval_mean_s,
        seed=run_seed,
        status="ok",
        produced=produced,
        delivered=delivered,
        lost=lost,
        pending=pending,
        avg_latency_s=sum(latencies) / len(latencies) if latencies else None,
        max_latency_s=max(latencies) if latencies else None,
        loss_pct=100.0 * lost / produced if produced else None,
        success_pct=100.0 * delivered / produced if produced else None,
        radio_on_s_mean=sum(radio.values()) / len(radio) if radio else None,
        queue_drops=result.queue_drops,
        duty_denials=result.duty_denials,
        transactions=counted if cfg.transcript else (),
    )


def run_replications(cfg: ScenarioConfig) -> list[MetricsRecord]:
    return [run_scenario(cfg, seed=cfg.seed + k) for k in range(cfg.replications)]


def _axis(values) -> list:
    # deterministic order for set-like inputs, caller order for sequences
    if isinstance(values, (list, tuple)):
        return list(values)
    return sorted(values)


def _cell_name(scheme: str, n_nodes: int, interval_s: float) -> str:
    return f"{scheme}-n{n_nodes}-i{interval_s:g}"


def _sweep_cells(
    base: ScenarioConfig,
    schemes,
    sizes,
    intervals,
) -> list[tuple[ScenarioConfig, int]]:
    cells = []
    for scheme in _axis(schemes):
        for n_nodes in _axis(sizes):
            for interval in _axis(intervals):
                cfg = replace(
                    base,
                    name=_cell_name(scheme, n_nodes, interval),
                    scheme=scheme,
                    n_nodes=n_nodes,
                    content_interval_mean_s=interval,
                )
                for k in range(cfg.replications):
                    cells.append((cfg, cfg.seed + k))
    return cells


def _run_cell(task: tuple[ScenarioConfig, int]) -> MetricsRecord:
    cfg, seed = task
    return run_scenario(cfg, seed=seed)


def sweep(
    base: ScenarioConfig,
    schemes: Sequence[str],
    sizes: Sequence[int],
    intervals: Sequence[float],
    workers: int = 1,
) -> list[MetricsRecord]:
    """Cross product of schemes x sizes x intervals x replication seeds.

    Row order is the axis order regardless of worker count or completion
    order, so the CSV serialization is reproducible byte for byte.
    """
    cells = _sweep_cells(base, schemes, sizes, intervals)
    if workers <= 1 or len(cells) <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, cells))


def _format_value(value, column: str) -> str:
    if value is None:
        return ""
    if column == "interval_s":
        return f"{value:g}"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _record_row(record: MetricsRecord) -> str:
    blank_numerics = record.status == "not_operable"
    parts = []
    for column in CSV_COLUMNS:
        if column in ("scenario", "scheme", "status"):
            parts.append(getattr(record, column))
            continue
        if blank_numerics and column not in ("n_nodes", "interval_s", "seed"):
            parts.append("")
            continue
        parts.append(_format_value(getattr(record, column), column))
    return ",".join(parts)


def sweep_csv(records: Iterable[MetricsRecord]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(_record_row(r) for r in records)
    return "\n".join(lines) + "\n"


def completion_cdf(records: Iterable[MetricsRecord]) -> list[tuple[float, float]]:
    """Completion fraction by latency; the plateau is the success ratio."""
    pool: list[Transaction] = []
    total = 0
    delivered = 0
    for record in records:
        total += record.produced
        delivered += record.delivered
        pool.extend(t for t in record.transactions if t.status == "delivered")
    if total == 0:
        raise ConfigError("completion_cdf needs at least one transaction")
    if delivered and not pool:
        raise ConfigError("records carry no transactions; rerun with transcript enabled")
    pool.sort(key=lambda t: t.latency_s)
    points = []
    done = 0
    for txn in pool:
        done += 1
        latency = txn.latency_s
        if points and points[-1][0] == latency:
            points[-1] = (latency, done / total)
        else:
            points.append((latency, done / total))
    return points


def transaction_lines(records: Iterable[MetricsRecord]) -> Iterator[str]:
    """One JSON object per transaction, for the JSONL dump."""
    for record in records:
        for txn in record.transactions:
            yield json.dumps(
                {
                    "scenario": record.scenario,
                    "seed": record.seed,
                    "name": str(txn.name),
                    "node": txn.node,
                    "created_s": txn.created_s,
                    "status": txn.status,
                    "delivered_s": txn.delivered_s,
                    "latency_s": txn.latency_s if txn.status == "delivered" else None,
                    "retransmissions": txn.retx_used,
                },
                sort_keys=True,
            )


_SCENARIO_FIELDS = {f.name for f in fields(ScenarioConfig)}


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    data = dict(raw)
    try:
        superframe = SuperframeConfig(**data.pop("superframe", {}))
    except TypeError as exc:
        raise ConfigError(f"superframe: {exc}") from exc
    try:
        phy = PhyConfig(**data.pop("phy", {}))
    except TypeError as exc:
        raise ConfigError(f"phy: {exc}") from exc
    unknown = set(data) - _SCENARIO_FIELDS
    if unknown:
        raise ConfigError(f"unknown scenario fields: {', '.join(sorted(unknown))}")
    missing = {"name", "scheme", "n_nodes", "content_interval_mean_s"} - set(data)
    if missing:
        raise ConfigError(f"missing scenario fields: {', '.join(sorted(missing))}")
    return ScenarioConfig(superframe=superframe, phy=phy, **data)


def scenario_from_json(path: str) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: scenario config must be a JSON object")
    return scenario_from_dict(raw)
