"""LoRa physical layer: frame airtime, shared medium, duty-cycle budgets.

The medium is a single collision domain.  Two frames that overlap in time on
the same channel destroy each other; there is no capture effect.  Receivers
are snapshotted when a transmission starts and a frame is delivered at its
end only to receivers that are still listening on that channel.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Any, Callable

from .engine import Simulator
from .errors import ConfigError

VALID_BANDWIDTHS = (125_000, 250_000, 500_000)

NUM_DATA_CHANNELS = 16
DATA_CHANNELS = tuple(range(NUM_DATA_CHANNELS))
COMMON_CHANNEL = 16

DUTY_WINDOW_S = 3600.0
DUTY_LIMIT_DATA = 0.01
DUTY_LIMIT_COMMON = 0.10

# Regulatory threshold for forcing the low-data-rate optimisation.
_LDRO_SYMBOL_TIME_S = 0.016

MAX_PHY_PAYLOAD = 255


@dataclass(frozen=True, slots=True)
class PhyConfig:
    """Radio settings shared by every station on the link."""

    spreading_factor: int = 7
    bandwidth_hz: int = 125_000
    coding_rate: int = 1
    preamble_symbols: int = 8
    explicit_header: bool = True
    crc: bool = True
    low_data_rate: bool | None = None

    def __post_init__(self) -> None:
        if not 7 <= self.spreading_factor <= 12:
            raise ConfigError(f"spreading factor {self.spreading_factor} outside 7..12")
        if self.bandwidth_hz not in VALID_BANDWIDTHS:
            raise ConfigError(f"bandwidth {self.bandwidth_hz} not one of {VALID_BANDWIDTHS}")
        if not 1 <= self.coding_rate <= 4:
            raise ConfigError(f"coding rate {self.coding_rate} outside 1..4")
        if self.preamble_symbols < 1:
            raise ConfigError("preamble must contain at least one symbol")

    @property
    def symbol_time_s(self) -> float:
        return (1 << self.spreading_factor) / self.bandwidth_hz

    @property
    def ldro_enabled(self) -> bool:
        if self.low_data_rate is not None:
            return self.low_data_rate
        return self.symbol_time_s >= _LDRO_SYMBOL_TIME_S


def _ceil_div(num: int, den: int) -> int:
    return -((-num) // den)


def payload_symbols(payload_bytes: int, cfg: PhyConfig) -> int:
    """Number of modulated symbols carrying the payload, header, and CRC."""
    if not 0 <= payload_bytes <= MAX_PHY_PAYLOAD:
        raise ConfigError(f"payload of {payload_bytes} bytes outside 0..{MAX_PHY_PAYLOAD}")
    sf = cfg.spreading_factor
    ih = 0 if cfg.explicit_header else 1
    crc = 1 if cfg.crc else 0
    de = 1 if cfg.ldro_enabled else 0
    num = 8 * payload_bytes - 4 * sf + 28 + 16 * crc - 20 * ih
    den = 4 * (sf - 2 * de)
    blocks = _ceil_div(num, den)
    return 8 + max(blocks * (cfg.coding_rate + 4), 0)


def time_on_air(payload_bytes: int, cfg: PhyConfig) -> float:
    """Airtime in seconds of one frame holding payload_bytes."""
    n_total = cfg.preamble_symbols + 4.25 + payload_symbols(payload_bytes, cfg)
    return n_total * cfg.symbol_time_s


class Transmission:
    """An in-flight frame on one channel."""

    __slots__ = ("sender", "channel", "start", "end", "frame", "doomed", "audience")

    def __init__(self, sender: int, channel: int, start: float, end: float, frame: Any):
        self.sender = sender
        self.channel = channel
        self.start = start
        self.end = end
        self.frame = frame
        self.doomed = False
        self.audience: tuple[int, ...] = ()


class Medium:
    """Single-domain radio channel set with overlap-destroys-both collisions."""

    def __init__(self, sim: Simulator):
        self.sim = sim
        self._active: dict[int, list[Transmission]] = {}
        self._last_end: dict[int, float] = {}
        self._listening: dict[int, frozenset[int]] = {}
        self._handlers: dict[int, Callable[[Any, int], None]] = {}
        # stations with one transceiver chain per channel; they stay deaf only
        # on channels they are currently driving
        self.concentrators: set[int] = set()
        self.frames_sent = 0
        self.frames_collided = 0
        self.frames_delivered = 0
        # observer hook for accounting; stations themselves never see this
        self.on_doomed: Callable[[Transmission], None] | None = None

    def register(self, station: int, handler: Callable[[Any, int], None]) -> None:
        self._handlers[station] = handler
        self._listening.setdefault(station, frozenset())

    def listen(self, station: int, channels: frozenset[int] | set[int]) -> None:
        self._listening[station] = frozenset(channels)

    def listening_channels(self, station: int) -> frozenset[int]:
        return self._listening.get(station, frozenset())

    def is_transmitting(self, station: int, channel: int | None = None) -> bool:
        if channel is not None:
            return any(
                tx.sender == station and tx.end > self.sim.now
                for tx in self._active.get(channel, ())
            )
        return any(
            tx.sender == station and tx.end > self.sim.now
            for txs in self._active.values()
            for tx in txs
        )

    def _deaf(self, station: int, channel: int) -> bool:
        if station in self.concentrators:
            return self.is_transmitting(station, channel)
        return self.is_transmitting(station)

    def cad_busy(self, channel: int, at: float) -> bool:
        """Channel-activity detection over [start, end): a transmission whose
        first sample coincides with the detection instant is already energy
        on the air, but one that just ended is not."""
        return any(tx.start <= at < tx.end for tx in self._active.get(channel, ()))

    def busy_during(self, channel: int, start: float, end: float) -> bool:
        """Was any transmission on the air within the half-open window
        [start, end)?  A transmission starting exactly at the window's end
        does not count; one whose tail reached into the window does, even
        when it already finished and left the active set."""
        if self._last_end.get(channel, float("-inf")) > start:
            return True
        return any(
            tx.start < end and tx.end > start for tx in self._active.get(channel, ())
        )

    def transmit(self, station: int, channel: int, duration: float, frame: Any) -> Transmission:
        now = self.sim.now
        scope = channel if station in self.concentrators else None
        assert not self.is_transmitting(station, scope), (
            f"station {station} is already transmitting"
        )
        tx = Transmission(station, channel, now, now + duration, frame)
        peers = self._active.setdefault(channel, [])
        for other in peers:
            if other.end > now:
                other.doomed = True
                tx.doomed = True
        tx.audience = tuple(
            sid
            for sid, chans in self._listening.items()
            if channel in chans and sid != station and not self._deaf(sid, channel)
        )
        peers.append(tx)
        self.frames_sent += 1
        self.sim.schedule(tx.end, "phy-rx-done", f"ch{channel}", lambda: self._complete(tx))
        return tx

    def _complete(self, tx: Transmission) -> None:
        self._active[tx.channel].remove(tx)
        if tx.end > self._last_end.get(tx.channel, float("-inf")):
            self._last_end[tx.channel] = tx.end
        if tx.doomed:
            self.frames_collided += 1
            if self.on_doomed is not None:
                self.on_doomed(tx)
            return
        for sid in tx.audience:
            if tx.channel not in self._listening.get(sid, frozenset()):
                continue
            if self._deaf(sid, tx.channel):
                continue
            handler = self._handlers.get(sid)
            if handler is not None:
                self.frames_delivered += 1
                handler(tx.frame, tx.channel)


class DutyCycleLedger:
    """Sliding-window airtime budget per (station, channel) key.

    A past transmission counts against the budget until its start time falls
    out of the window, so the spent total never underestimates recent usage.
    """

    def __init__(self, window_s: float = DUTY_WINDOW_S):
        self.window_s = window_s
        self._log: dict[Any, deque[tuple[float, float]]] = {}
        self.denials = 0

    def spent(self, key: Any, now: float) -> float:
        log = self._log.get(key)
        if not log:
            return 0.0
        horizon = now - self.window_s
        while log and log[0][0] <= horizon:
            log.popleft()
        return sum(d for _, d in log)

    def permit(self, key: Any, limit: float, duration: float, now: float) -> tuple[bool, float]:
        """Try to book airtime; returns (allowed, next_allowed_at)."""
        budget = limit * self.window_s
        if duration > budget:
            raise ConfigError(
                f"frame airtime {duration:.3f}s exceeds whole duty budget {budget:.3f}s"
            )
        log = self._log.setdefault(key, deque())
        spent = self.spent(key, now)
        if spent + duration <= budget:
            log.append((now, duration))
            return True, now
        self.denials += 1
        freed = 0.0
        next_at = now
        for start, dur in log:
            freed += dur
            next_at = start + self.window_s
            if spent - freed + duration <= budget:
                break
        return False, next_at


def duty_limit_for(channel: int) -> float:
    return DUTY_LIMIT_COMMON if channel == COMMON_CHANNEL else DUTY_LIMIT_DATA
