"""Deterministic discrete-event core with named random substreams.

Events are ordered by (time, insertion sequence) so that runs with the same
seed and configuration dispatch in exactly the same order.  Randomness is
drawn from named streams derived from the global seed and the stream name,
never from creation order, so adding a consumer of randomness does not
perturb the draws of existing ones.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from typing import Callable, IO

import numpy as np

from .errors import ConfigError, SimClockError


@dataclass(slots=True)
class SimEvent:
    """One scheduled callback, ordered by (time, seq)."""

    time: float
    seq: int
    kind: str
    target: str
    fn: Callable[[], None] | None = None
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


def _stream_key(name: str) -> int:
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class RngStream:
    """A named, independently seeded random source."""

    __slots__ = ("name", "generator")

    def __init__(self, name: str, seed: int):
        self.name = name
        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((seed & 0xFFFFFFFF, _stream_key(name))))
        )

    def exponential(self, mean: float) -> float:
        if mean <= 0:
            raise ConfigError(f"exponential mean must be positive, got {mean}")
        return float(self.generator.exponential(mean))

    def uniform(self, low: float, high: float) -> float:
        return float(self.generator.uniform(low, high))

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high] inclusive."""
        return int(self.generator.integers(low, high + 1))

    def random(self) -> float:
        return float(self.generator.random())


class Simulator:
    """Event queue, simulated clock, and the RNG stream registry."""

    def __init__(self, seed: int = 0, trace: IO[str] | None = None):
        self.now = 0.0
        self.seed = int(seed)
        self._seq = 0
        self._heap: list[tuple[float, int, SimEvent]] = []
        self._streams: dict[str, RngStream] = {}
        self._trace = trace

    # -- randomness -------------------------------------------------------

    def stream(self, name: str) -> RngStream:
        st = self._streams.get(name)
        if st is None:
            st = RngStream(name, self.seed)
            self._streams[name] = st
        return st

    def draw_exponential(self, stream: str | RngStream, mean: float) -> float:
        if isinstance(stream, str):
            stream = self.stream(stream)
        return stream.exponential(mean)

    # -- scheduling -------------------------------------------------------

    def schedule(
        self,
        time: float,
        kind: str,
        target: str,
        fn: Callable[[], None] | None = None,
    ) -> SimEvent:
        if time < self.now:
            raise SimClockError(
                f"cannot schedule {kind!r} at t={time} before current time t={self.now}"
            )
        ev = SimEvent(time, self._seq, kind, target, fn)
        self._seq += 1
        heapq.heappush(self._heap, (time, ev.seq, ev))
        return ev

    def cancel(self, event: SimEvent) -> None:
        event.cancel()

    def run_until(self, t_end: float) -> int:
        """Dispatch every pending event with time <= t_end, in order.

        Returns the number of dispatched (non-cancelled) events.  The clock
        is left at t_end even when the queue drains early.
        """
        dispatched = 0
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            _, _, ev = heapq.heappop(heap)
            if ev.cancelled:
                continue
            self.now = ev.time
            if self._trace is not None:
                self._trace.write(
                    json.dumps(
                        {"time": round(ev.time, 9), "seq": ev.seq, "kind": ev.kind, "target": ev.target}
                    )
                    + "\n"
                )
            if ev.fn is not None:
                ev.fn()
            dispatched += 1
        self.now = t_end
        return dispatched

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)
