"""Beacon-anchored MAC with contention access and guaranteed time slots.

Time is carved into superframes of 16 slots: slot 0 is the beacon period,
slots 1..8 the contention access period (CAP), slots 9..15 the contention
free period (CFP).  Several superframes form a repeating multi-superframe
(msf); beacons are emitted every beacon_interval_msf multi-superframes.
CFP cells are granted statically, one owner per (superframe, slot, channel),
and in paired mode a node-transmit cell is immediately followed in time by
the matching node-receive cell.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .engine import Simulator
from .errors import ConfigError, ScheduleInfeasibleError
from .icn import bundle_size
from .phy import (
    COMMON_CHANNEL,
    NUM_DATA_CHANNELS,
    DutyCycleLedger,
    Medium,
    PhyConfig,
    duty_limit_for,
    time_on_air,
)

BROADCAST = -1
MAC_HEADER_BYTES = 11
MAX_FRAME_BYTES = 127

BEACON_SLOT = 0
CAP_FIRST_SLOT = 1
CAP_SLOT_COUNT = 8
CFP_FIRST_SLOT = 9
CFP_SLOT_COUNT = 7

ADDRESS_BYTES = 2


@dataclass(frozen=True, slots=True)
class SuperframeConfig:
    superframes_per_msf: int = 4
    slots_per_superframe: int = 16
    slot_duration_s: float = 0.5071875
    beacon_interval_msf: int = 4
    common_channel: int = COMMON_CHANNEL

    def __post_init__(self) -> None:
        if self.superframes_per_msf < 1:
            raise ConfigError("a multi-superframe needs at least one superframe")
        if self.slots_per_superframe != 16:
            raise ConfigError("the slot structure is fixed at 16 slots per superframe")
        if self.slot_duration_s <= 0:
            raise ConfigError("slot duration must be positive")
        if self.beacon_interval_msf < 1:
            raise ConfigError("beacon interval must cover at least one multi-superframe")

    @property
    def superframe_duration_s(self) -> float:
        return self.slots_per_superframe * self.slot_duration_s

    @property
    def msf_duration_s(self) -> float:
        return self.superframes_per_msf * self.superframe_duration_s

    @property
    def beacon_interval_s(self) -> float:
        return self.beacon_interval_msf * self.msf_duration_s

    @property
    def cfp_slots_per_msf(self) -> int:
        return self.superframes_per_msf * CFP_SLOT_COUNT

    @property
    def cap_duration_s(self) -> float:
        return CAP_SLOT_COUNT * self.slot_duration_s

    # -- geometry ----------------------------------------------------------

    def superframe_start(self, index: int) -> float:
        return index * self.superframe_duration_s

    def superframe_index_at(self, t: float) -> int:
        return int((t + 1e-9) // self.superframe_duration_s)

    def cap_bounds(self, superframe_index: int) -> tuple[float, float]:
        start = self.superframe_start(superframe_index) + CAP_FIRST_SLOT * self.slot_duration_s
        return start, start + self.cap_duration_s

    def next_cap(self, t: float) -> tuple[float, float]:
        """Bounds of the CAP containing t, or the next one if t is past it."""
        idx = self.superframe_index_at(t)
        start, end = self.cap_bounds(idx)
        if t >= end:
            start, end = self.cap_bounds(idx + 1)
        return start, end

    def cell_offset_in_msf(self, superframe_index: int, slot_index: int) -> float:
        if not 0 <= slot_index < CFP_SLOT_COUNT:
            raise ConfigError(f"CFP slot index {slot_index} outside 0..6")
        return (
            superframe_index * self.superframe_duration_s
            + (CFP_FIRST_SLOT + slot_index) * self.slot_duration_s
        )

    def next_cell_time(self, cell: "GtsCell", t: float) -> float:
        """Start of the first occurrence of the cell at or after t."""
        offset = self.cell_offset_in_msf(cell.superframe_index, cell.slot_index)
        msf = max(0, math.ceil((t - offset) / self.msf_duration_s - 1e-12))
        start = msf * self.msf_duration_s + offset
        if start < t - 1e-9:
            start += self.msf_duration_s
        return start

    def beacon_time(self, k: int) -> float:
        return k * self.beacon_interval_s


@dataclass(frozen=True, slots=True)
class GtsCell:
    superframe_index: int
    slot_index: int
    channel: int
    owner: int
    direction: str  # "tx" = owner transmits to the gateway, "rx" = owner receives

    def __post_init__(self) -> None:
        if self.direction not in ("tx", "rx"):
            raise ConfigError(f"unknown cell direction {self.direction!r}")
        if not 0 <= self.channel < NUM_DATA_CHANNELS:
            raise ConfigError(f"cell channel {self.channel} outside 0..15")

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.superframe_index, self.slot_index, self.channel)


class Schedule:
    """Immutable set of granted cells with per-owner lookups."""

    def __init__(self, cells: tuple[GtsCell, ...]):
        self.cells = cells
        seen: dict[tuple[int, int, int], GtsCell] = {}
        for c in cells:
            if c.key in seen:
                raise ConfigError(f"cell conflict at (sf,slot,ch)={c.key}")
            seen[c.key] = c
        self._by_owner: dict[int, list[GtsCell]] = {}
        for c in cells:
            self._by_owner.setdefault(c.owner, []).append(c)

    def owned(self, owner: int, direction: str | None = None) -> list[GtsCell]:
        cells = self._by_owner.get(owner, [])
        if direction is None:
            return list(cells)
        return [c for c in cells if c.direction == direction]

    def __len__(self) -> int:
        return len(self.cells)


def build_static_schedule(
    n_nodes: int,
    slots_per_node: int,
    pattern: str,
    cfg: SuperframeConfig,
    roles: tuple[str, ...] | None = None,
    node_ids: tuple[int, ...] | None = None,
) -> Schedule:
    """Grant each node slots_per_node allocations, spread over time first.

    Consecutive allocations advance through the CFP timeslot sequence and
    shift to the next channel once the sequence wraps, so cells sharing a
    timeslot sit on distinct channels and downlink cells spread over
    distinct timeslots.  Paired mode grants two adjacent cells per
    allocation: the owner's transmit cell, then its receive cell.
    """
    if pattern not in ("unidirectional", "paired-tx-rx"):
        raise ConfigError(f"unknown schedule pattern {pattern!r}")
    if slots_per_node not in (0, 1, 2):
        raise ConfigError(f"slots_per_node must be 0, 1, or 2, got {slots_per_node}")
    if roles is None:
        roles = tuple("up" for _ in range(slots_per_node))
    if len(roles) != slots_per_node:
        raise ConfigError("one role per allocated slot is required")
    for r in roles:
        if r not in ("up", "down", "both"):
            raise ConfigError(f"unknown allocation role {r!r}")
    if node_ids is None:
        node_ids = tuple(range(1, n_nodes + 1))

    paired = pattern == "paired-tx-rx"
    per_alloc_cells = 2 if paired else 1
    required = n_nodes * slots_per_node * per_alloc_cells
    capacity = cfg.cfp_slots_per_msf * NUM_DATA_CHANNELS
    if paired:
        capacity //= 2
    if required > capacity:
        raise ScheduleInfeasibleError(
            f"{required} CFP cells required for {n_nodes} nodes x {slots_per_node} "
            f"slots ({pattern}) but only {capacity} fit one multi-superframe"
        )

    n_seq = cfg.cfp_slots_per_msf
    cells: list[GtsCell] = []
    if not paired:
        for a in range(slots_per_node):
            direction = "rx" if roles[a] == "down" else "tx"
            for i, owner in enumerate(node_ids):
                idx = a * n_nodes + i
                seq = idx % n_seq
                ring = idx // n_seq
                channel = (seq + ring) % NUM_DATA_CHANNELS
                cells.append(GtsCell(seq // CFP_SLOT_COUNT, seq % CFP_SLOT_COUNT, channel, owner, direction))
    else:
        pairs_per_channel = n_seq // 2
        if pairs_per_channel == 0:
            raise ScheduleInfeasibleError(
                "paired cells need at least two CFP slots per multi-superframe"
            )
        for a in range(slots_per_node):
            for i, owner in enumerate(node_ids):
                idx = a * n_nodes + i
                pos = idx % pairs_per_channel
                ring = idx // pairs_per_channel
                channel = (pos + ring) % NUM_DATA_CHANNELS
                # downlink first: an answer to a pulled interest rides the
                # adjacent uplink cell instead of waiting a full cycle
                rx_seq = 2 * pos
                tx_seq = 2 * pos + 1
                cells.append(
                    GtsCell(rx_seq // CFP_SLOT_COUNT, rx_seq % CFP_SLOT_COUNT, channel, owner, "rx")
                )
                cells.append(
                    GtsCell(tx_seq // CFP_SLOT_COUNT, tx_seq % CFP_SLOT_COUNT, channel, owner, "tx")
                )
    return Schedule(tuple(cells))


@dataclass(slots=True)
class MacFrame:
    src: int
    dst: int
    carrier: str  # "BEACON" | "CAP" | "CFP"
    messages: tuple = ()
    ack_requested: bool = False
    kind: str = "data"  # "data" | "ack" | "beacon"
    pending: tuple[int, ...] = ()
    uid: tuple[int, int] = (0, 0)
    ack_for: tuple[int, int] | None = None

    @property
    def payload_bytes(self) -> int:
        if self.kind == "ack":
            return 3
        base = bundle_size(list(self.messages))
        if self.kind == "beacon":
            base += ADDRESS_BYTES * len(self.pending)
        return base

    def validate(self) -> None:
        if self.payload_bytes + MAC_HEADER_BYTES > MAX_FRAME_BYTES:
            raise ConfigError(
                f"frame payload {self.payload_bytes} B breaks the "
                f"{MAX_FRAME_BYTES} B frame size budget"
            )


@dataclass(frozen=True, slots=True)
class CsmaParams:
    min_backoff_exponent: int = 3
    max_backoff_exponent: int = 5
    max_backoffs: int = 4
    cad_unit_s: float = 0.01
    ack_turnaround_s: float = 0.01
    ack_retries: int = 3


@dataclass(slots=True)
class MacCounters:
    enqueued: int = 0
    queue_drops: int = 0
    sent_cap: int = 0
    sent_cfp: int = 0
    csma_failures: int = 0
    ack_failures: int = 0
    duty_denials: int = 0
    cap_deferrals: int = 0
    acks_sent: int = 0


class MacEntity:
    """Per-station MAC state machine over the shared medium."""

    def __init__(
        self,
        sim: Simulator,
        medium: Medium,
        station_id: int,
        cfg: SuperframeConfig,
        phy: PhyConfig,
        ledger: DutyCycleLedger,
        csma: CsmaParams = CsmaParams(),
        queue_capacity: int = 8,
        cap_rx: bool = False,
    ):
        self.sim = sim
        self.medium = medium
        self.station_id = station_id
        self.cfg = cfg
        self.phy = phy
        self.ledger = ledger
        self.csma = csma
        self.queue_capacity = queue_capacity
        self.cap_rx = cap_rx
        self.counters = MacCounters()
        self.radio_on_s = 0.0

        self.on_receive: Callable[[MacFrame], None] | None = None
        self.on_sent: Callable[[MacFrame, str], None] | None = None
        self.on_failed: Callable[[MacFrame, str], None] | None = None

        self.queues: dict[str, deque[MacFrame]] = {"CAP": deque(), "CFP": deque()}
        self.tx_cells: list[GtsCell] = []
        self.rx_cells: list[GtsCell] = []

        self._uid_counter = 0
        self._rng = sim.stream(f"csma/{station_id}")
        self._listen_refs: dict[int, int] = {}
        self._busy_until = 0.0
        self._cap_busy = False
        self._cfp_event_pending = False
        self._awaiting_ack: tuple[int, int] | None = None
        self._awaiting_frame: MacFrame | None = None
        self._ack_timeout_event = None
        self._started = False
        self.medium.register(station_id, self._on_phy_frame)

    # -- identities and helpers -------------------------------------------

    def next_uid(self) -> tuple[int, int]:
        self._uid_counter += 1
        return (self.station_id, self._uid_counter)

    def frame_airtime(self, frame: MacFrame) -> float:
        return time_on_air(frame.payload_bytes + MAC_HEADER_BYTES, self.phy)

    def _radio_busy(self, channel: int) -> bool:
        # a plain station has one transceiver for all channels
        return self.medium.is_transmitting(self.station_id)

    # -- listening management ----------------------------------------------

    def _listen_add(self, channel: int) -> None:
        self._listen_refs[channel] = self._listen_refs.get(channel, 0) + 1
        self._apply_listen()

    def _listen_remove(self, channel: int) -> None:
        n = self._listen_refs.get(channel, 0) - 1
        if n <= 0:
            self._listen_refs.pop(channel, None)
        else:
            self._listen_refs[channel] = n
        self._apply_listen()

    def _apply_listen(self) -> None:
        self.medium.listen(self.station_id, frozenset(self._listen_refs))

    def listen_window(self, channel: int, start: float, duration: float, count: bool = True) -> None:
        """Schedule a radio-on listening window on one channel."""

        def wake() -> None:
            self._listen_add(channel)
            if count:
                self.radio_on_s += duration

        self.sim.schedule(start, "radio-wake", f"n{self.station_id}", wake)
        self.sim.schedule(
            start + duration, "radio-sleep", f"n{self.station_id}", lambda: self._listen_remove(channel)
        )

    # -- wake scheduling -----------------------------------------------------

    def start(self) -> None:
        """Begin periodic beacon listening (and CAP listening when cap_rx)."""
        if self._started:
            return
        self._started = True
        self._schedule_beacon_wake(0)
        if self.cap_rx:
            self._schedule_cap_wake(self.cfg.superframe_index_at(self.sim.now))
        self._schedule_rx_cell_wakes()

    def _schedule_beacon_wake(self, k: int) -> None:
        t = self.cfg.beacon_time(k)
        if t < self.sim.now:
            self._schedule_beacon_wake(k + 1)
            return
        self.listen_window(self.cfg.common_channel, t, self.cfg.slot_duration_s)
        self.sim.schedule(
            t + self.cfg.slot_duration_s,
            "beacon-wake-next",
            f"n{self.station_id}",
            lambda: self._schedule_beacon_wake(k + 1),
        )

    def _schedule_cap_wake(self, superframe_index: int) -> None:
        start, end = self.cfg.cap_bounds(superframe_index)
        if start < self.sim.now:
            self._schedule_cap_wake(superframe_index + 1)
            return
        self.listen_window(self.cfg.common_channel, start, end - start)
        self.sim.schedule(
            end,
            "cap-wake-next",
            f"n{self.station_id}",
            lambda: self._schedule_cap_wake(superframe_index + 1),
        )

    def _schedule_rx_cell_wakes(self) -> None:
        for cell in self.rx_cells:
            self._schedule_one_rx_cell(cell)

    def _schedule_one_rx_cell(self, cell: GtsCell) -> None:
        start = self.cfg.next_cell_time(cell, self.sim.now + 1e-9)
        self.listen_window(cell.channel, start, self.cfg.slot_duration_s)
        self.sim.schedule(
            start + self.cfg.slot_duration_s,
            "cell-wake-next",
            f"n{self.station_id}",
            lambda: self._schedule_one_rx_cell(cell),
        )

    def indirect_wake(self, beacon_time: float) -> None:
        """Stay awake for the CAP right after a beacon announcing pending data."""
        sf = self.cfg.superframe_index_at(beacon_time + 1e-9)
        start, end = self.cfg.cap_bounds(sf)
        if start < self.sim.now:
            return
        self.listen_window(self.cfg.common_channel, start, end - start)

    # -- queueing -------------------------------------------------------------

    def enqueue(self, frame: MacFrame, priority: bool = False) -> bool:
        frame.validate()
        if frame.uid == (0, 0):
            frame.uid = self.next_uid()
        queue = self.queues[frame.carrier]
        self.counters.enqueued += 1
        if len(queue) >= self.queue_capacity:
            self.counters.queue_drops += 1
            return False
        if priority:
            queue.appendleft(frame)
        else:
            queue.append(frame)
        if frame.carrier == "CAP":
            self._kick_cap()
        else:
            self._kick_cfp()
        return True

    # -- CAP: slotted CSMA-CA ---------------------------------------------

    def _kick_cap(self) -> None:
        if self._cap_busy or not self.queues["CAP"]:
            return
        self._cap_busy = True
        self._begin_attempt(self.queues["CAP"][0], ack_round=0)

    def _begin_attempt(self, frame: MacFrame, ack_round: int) -> None:
        self._csma_round(frame, round_index=0, ack_round=ack_round)

    def _csma_round(self, frame: MacFrame, round_index: int, ack_round: int) -> None:
        exponent = min(self.csma.min_backoff_exponent + round_index, self.csma.max_backoff_exponent)
        backoff_units = self._rng.integers(0, (1 << exponent) - 1)
        self._place_cad(frame, round_index, ack_round, backoff_units)

    def _place_cad(self, frame: MacFrame, round_index: int, ack_round: int, backoff_units: int) -> None:
        unit = self.csma.cad_unit_s
        cap_start, cap_end = self.cfg.next_cap(self.sim.now)
        base = max(self.sim.now, cap_start)
        cad_at = base + backoff_units * unit
        cycle = unit + self.frame_airtime(frame)
        if frame.ack_requested and frame.dst != BROADCAST:
            cycle += self.csma.ack_turnaround_s + self._ack_airtime()
        if cad_at + cycle > cap_end:
            self.counters.cap_deferrals += 1
            next_start, _ = self.cfg.next_cap(cap_end + 1e-9)
            self.sim.schedule(
                next_start,
                "cap-deferred",
                f"n{self.station_id}",
                lambda: self._place_cad(frame, round_index, ack_round, backoff_units),
            )
            return
        self.sim.schedule(
            cad_at + unit,
            "cad-decision",
            f"n{self.station_id}",
            lambda: self._cad_result(frame, round_index, ack_round),
        )

    def _cad_result(self, frame: MacFrame, round_index: int, ack_round: int) -> None:
        # the detector listened for one whole unit and reports at its end;
        # anything on the air during that window counts as busy
        if not self.cap_rx:
            self.radio_on_s += self.csma.cad_unit_s
        window_end = self.sim.now
        window_start = window_end - self.csma.cad_unit_s
        if self.medium.busy_during(self.cfg.common_channel, window_start, window_end):
            if round_index + 1 >= self.csma.max_backoffs:
                self._cap_outcome(frame, "failed", "csma_exhausted")
            else:
                self._csma_round(frame, round_index + 1, ack_round)
            return
        airtime = self.frame_airtime(frame)
        allowed, next_at = self.ledger.permit(
            (self.station_id, self.cfg.common_channel),
            duty_limit_for(self.cfg.common_channel),
            airtime,
            self.sim.now,
        )
        if not allowed:
            self.counters.duty_denials += 1
            resume = max(next_at, self.sim.now)
            self.sim.schedule(
                resume,
                "duty-resume",
                f"n{self.station_id}",
                lambda: self._begin_attempt(frame, ack_round),
            )
            return
        self._cap_transmit(frame, ack_round)

    def _cap_transmit(self, frame: MacFrame, ack_round: int) -> None:
        if self._radio_busy(self.cfg.common_channel):
            # the transceiver serving this channel is mid-frame
            self.sim.schedule(
                max(self._busy_until, self.sim.now) + 1e-9,
                "cap-tx-retry",
                f"n{self.station_id}",
                lambda: self._cap_transmit(frame, ack_round),
            )
            return
        airtime = self.frame_airtime(frame)
        self.medium.transmit(self.station_id, self.cfg.common_channel, airtime, frame)
        self._busy_until = self.sim.now + airtime
        if not self.cap_rx:
            self.radio_on_s += airtime
        end = self.sim.now + airtime
        if frame.ack_requested and frame.dst != BROADCAST:
            deadline = end + self.csma.ack_turnaround_s + self._ack_airtime() + self.csma.cad_unit_s
            self._awaiting_ack = frame.uid
            self._awaiting_frame = frame
            if not self.cap_rx:
                self.listen_window(self.cfg.common_channel, end, deadline - end)
            self._ack_timeout_event = self.sim.schedule(
                deadline,
                "ack-timeout",
                f"n{self.station_id}",
                lambda: self._ack_missing(frame, ack_round),
            )
        else:
            self.sim.schedule(
                end, "cap-tx-done", f"n{self.station_id}", lambda: self._cap_outcome(frame, "sent", "")
            )

    def _ack_airtime(self) -> float:
        return time_on_air(3 + MAC_HEADER_BYTES, self.phy)

    def _ack_missing(self, frame: MacFrame, ack_round: int) -> None:
        self._awaiting_ack = None
        self._awaiting_frame = None
        if ack_round >= self.csma.ack_retries:
            self.counters.ack_failures += 1
            self._cap_outcome(frame, "failed", "ack_exhausted")
            return
        self._begin_attempt(frame, ack_round + 1)

    def _cap_outcome(self, frame: MacFrame, status: str, reason: str) -> None:
        queue = self.queues["CAP"]
        # a priority enqueue may have displaced the in-flight frame from the
        # head, so remove it by identity wherever it sits
        for i, queued in enumerate(queue):
            if queued is frame:
                del queue[i]
                break
        if status == "sent":
            self.counters.sent_cap += 1
            if self.on_sent is not None:
                self.on_sent(frame, "CAP")
        else:
            if reason == "csma_exhausted":
                self.counters.csma_failures += 1
            if self.on_failed is not None:
                self.on_failed(frame, reason)
        self._cap_busy = False
        self._kick_cap()

    # -- CFP: owned-cell service -------------------------------------------

    def set_cells(self, tx_cells: list[GtsCell], rx_cells: list[GtsCell]) -> None:
        self.tx_cells = list(tx_cells)
        self.rx_cells = list(rx_cells)

    def _next_tx_cell(self, after: float) -> tuple[GtsCell, float] | None:
        best: tuple[GtsCell, float] | None = None
        for cell in self.tx_cells:
            at = self.cfg.next_cell_time(cell, after)
            if best is None or at < best[1]:
                best = (cell, at)
        return best

    def _kick_cfp(self, not_before: float | None = None) -> None:
        if self._cfp_event_pending or not self.queues["CFP"]:
            return
        after = self.sim.now + 1e-9 if not_before is None else not_before
        found = self._next_tx_cell(after)
        if found is None:
            return
        cell, at = found
        self._cfp_event_pending = True
        self.sim.schedule(
            at, "cfp-cell", f"n{self.station_id}", lambda: self._serve_cfp_cell(cell)
        )

    def _serve_cfp_cell(self, cell: GtsCell) -> None:
        self._cfp_event_pending = False
        queue = self.queues["CFP"]
        if not queue:
            return
        cell_time = self.sim.now
        if self._radio_busy(cell.channel):
            self._kick_cfp()
            return
        frame = queue[0]
        airtime = self.frame_airtime(frame)
        if airtime > self.cfg.slot_duration_s:
            raise ConfigError("frame airtime exceeds the guaranteed slot duration")
        allowed, next_at = self.ledger.permit(
            (self.station_id, cell.channel), duty_limit_for(cell.channel), airtime, cell_time
        )
        if not allowed:
            self.counters.duty_denials += 1
            self._kick_cfp(not_before=max(next_at, cell_time + 1e-9))
            return
        queue.popleft()
        self.medium.transmit(self.station_id, cell.channel, airtime, frame)
        self._busy_until = cell_time + airtime
        self.radio_on_s += airtime
        self.counters.sent_cfp += 1
        end = cell_time + airtime
        if self.on_sent is not None:
            done = frame
            self.sim.schedule(
                end, "cfp-tx-done", f"n{self.station_id}", lambda: self.on_sent(done, "CFP")
            )
        self._kick_cfp(not_before=cell_time + 1e-9)

    # -- reception ------------------------------------------------------------

    def _on_phy_frame(self, frame: MacFrame, channel: int) -> None:
        if frame.dst not in (self.station_id, BROADCAST):
            return
        if frame.kind == "ack":
            if self._awaiting_ack is not None and frame.ack_for == self._awaiting_ack:
                self._awaiting_ack = None
                if self._ack_timeout_event is not None:
                    self._ack_timeout_event.cancel()
                    self._ack_timeout_event = None
                acked = self._awaiting_frame
                self._awaiting_frame = None
                if acked is not None:
                    self._cap_outcome(acked, "sent", "")
            return
        if frame.kind == "beacon" and self.station_id in frame.pending:
            self.indirect_wake(self.sim.now)
        if frame.ack_requested and frame.dst == self.station_id:
            self._send_ack(frame)
        if self.on_receive is not None:
            self.on_receive(frame)

    def _send_ack(self, frame: MacFrame) -> None:
        ack = MacFrame(
            src=self.station_id,
            dst=frame.src,
            carrier="CAP",
            kind="ack",
            uid=self.next_uid(),
            ack_for=frame.uid,
        )
        at = self.sim.now + self.csma.ack_turnaround_s
        airtime = self._ack_airtime()

        def fire() -> None:
            if self._radio_busy(self.cfg.common_channel):
                return
            allowed, _ = self.ledger.permit(
                (self.station_id, self.cfg.common_channel),
                duty_limit_for(self.cfg.common_channel),
                airtime,
                self.sim.now,
            )
            if not allowed:
                self.counters.duty_denials += 1
                return
            self.medium.transmit(self.station_id, self.cfg.common_channel, airtime, ack)
            self._busy_until = self.sim.now + airtime
            self.counters.acks_sent += 1
            if not self.cap_rx:
                self.radio_on_s += airtime

        self.sim.schedule(at, "ack-tx", f"n{self.station_id}", fire)


class GatewayMac(MacEntity):
    """Coordinator role: beacons, always-on radio, per-node downlink queues."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.downlink: dict[int, deque[MacFrame]] = {}
        self.downlink_drops = 0
        self._downlink_pending: set[int] = set()
        self.beacon_source: Callable[[], tuple[tuple[int, ...], tuple]] | None = None
        self.on_beacon_sent: Callable[[MacFrame], None] | None = None
        self.beacons_sent = 0
        self.medium.concentrators.add(self.station_id)
        self.medium.listen(
            self.station_id,
            frozenset(range(NUM_DATA_CHANNELS)) | {self.cfg.common_channel},
        )

    def _radio_busy(self, channel: int) -> bool:
        # concentrator hardware drives each channel independently
        return self.medium.is_transmitting(self.station_id, channel)

    def _apply_listen(self) -> None:
        # the coordinator radio never sleeps and hears every channel
        self.medium.listen(
            self.station_id,
            frozenset(range(NUM_DATA_CHANNELS)) | {self.cfg.common_channel},
        )

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        self._schedule_beacon_emit(0)

    def _schedule_beacon_emit(self, k: int) -> None:
        t = self.cfg.beacon_time(k)
        if t < self.sim.now:
            self._schedule_beacon_emit(k + 1)
            return
        # small offset so listener wake events at the boundary run first
        self.sim.schedule(t + self._CELL_GUARD_S, "beacon", "gw", lambda: self._emit_beacon(k))

    def _emit_beacon(self, k: int) -> None:
        pending: tuple[int, ...] = ()
        messages: tuple = ()
        if self.beacon_source is not None:
            pending, messages = self.beacon_source()
        frame = MacFrame(
            src=self.station_id,
            dst=BROADCAST,
            carrier="BEACON",
            kind="beacon",
            messages=messages,
            pending=pending,
            uid=self.next_uid(),
        )
        frame.validate()
        airtime = self.frame_airtime(frame)
        if airtime > self.cfg.slot_duration_s:
            raise ConfigError("beacon does not fit the beacon-period slot")
        allowed, _ = self.ledger.permit(
            (self.station_id, self.cfg.common_channel),
            duty_limit_for(self.cfg.common_channel),
            airtime,
            self.sim.now,
        )
        if allowed and not self._radio_busy(self.cfg.common_channel):
            self.medium.transmit(self.station_id, self.cfg.common_channel, airtime, frame)
            self._busy_until = self.sim.now + airtime
            self.beacons_sent += 1
            if self.on_beacon_sent is not None:
                self.on_beacon_sent(frame)
        else:
            self.counters.duty_denials += 1
        self._schedule_beacon_emit(k + 1)

    # -- downlink over nodes' receive cells ---------------------------------

    def downlink_enqueue(self, node: int, frame: MacFrame, cells: list[GtsCell]) -> bool:
        frame.validate()
        queue = self.downlink.setdefault(node, deque())
        self.counters.enqueued += 1
        if len(queue) >= self.queue_capacity:
            self.downlink_drops += 1
            self.counters.queue_drops += 1
            return False
        queue.append(frame)
        self._kick_downlink(node, cells)
        return True

    _CELL_GUARD_S = 1e-6  # receiver wake events at the slot edge must run first

    def _kick_downlink(self, node: int, cells: list[GtsCell], not_before: float | None = None) -> None:
        if node in self._downlink_pending or not self.downlink.get(node):
            return
        after = self.sim.now + 1e-9 if not_before is None else not_before
        best: tuple[GtsCell, float] | None = None
        for cell in cells:
            at = self.cfg.next_cell_time(cell, after)
            if best is None or at < best[1]:
                best = (cell, at)
        if best is None:
            return
        cell, at = best
        self._downlink_pending.add(node)
        self.sim.schedule(
            at + self._CELL_GUARD_S,
            "gw-downlink-cell",
            "gw",
            lambda: self._serve_downlink(node, cells, cell),
        )

    def _serve_downlink(self, node: int, cells: list[GtsCell], cell: GtsCell) -> None:
        self._downlink_pending.discard(node)
        queue = self.downlink.get(node)
        if not queue:
            return
        now = self.sim.now
        frame = queue[0]
        airtime = self.frame_airtime(frame)
        if airtime + self._CELL_GUARD_S > self.cfg.slot_duration_s:
            raise ConfigError("frame airtime exceeds the guaranteed slot duration")
        if self._radio_busy(cell.channel):
            self._kick_downlink(node, cells)
            return
        allowed, next_at = self.ledger.permit(
            (self.station_id, cell.channel), duty_limit_for(cell.channel), airtime, now
        )
        if not allowed:
            self.counters.duty_denials += 1
            self._kick_downlink(node, cells, not_before=max(next_at, now + 1e-9))
            return
        queue.popleft()
        self.medium.transmit(self.station_id, cell.channel, airtime, frame)
        self._busy_until = now + airtime
        self.counters.sent_cfp += 1
        if self.on_sent is not None:
            done = frame
            self.sim.schedule(now + airtime, "gw-tx-done", "gw", lambda: self.on_sent(done, "CFP"))
        self._kick_downlink(node, cells)
