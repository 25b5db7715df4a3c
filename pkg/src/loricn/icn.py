"""ICN forwarding plane: names, messages, PIT/CS/FIB tables, bundling.

Message sizes follow a byte-count model rather than a bit-exact codec: an
encoded name costs its UTF-8 component bytes plus one byte per component,
an Interest adds 2 bytes, a Data adds 4 bytes plus its payload.  Frames
bundle messages greedily first-fit up to a usable payload budget.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum

from .errors import EncodeError

DEFAULT_BUNDLE_BUDGET = 100
DEFAULT_FRESHNESS_S = 300.0


@dataclass(frozen=True, slots=True)
class Name:
    components: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("a name needs at least one component")

    @classmethod
    def parse(cls, text: str) -> "Name":
        parts = tuple(p for p in text.split("/") if p)
        return cls(parts)

    @property
    def encoded_size(self) -> int:
        return sum(len(c.encode("utf-8")) for c in self.components) + len(self.components)

    def is_prefix_of(self, other: "Name") -> bool:
        return self.components == other.components[: len(self.components)]

    def __str__(self) -> str:
        return "/" + "/".join(self.components)

    def __len__(self) -> int:
        return len(self.components)


@dataclass(frozen=True, slots=True)
class Interest:
    name: Name
    nonce: int
    lifetime_s: float
    origin_face: str = ""

    @property
    def encoded_size(self) -> int:
        return 2 + self.name.encoded_size


@dataclass(frozen=True, slots=True)
class Data:
    name: Name
    payload_size: int
    freshness_s: float = DEFAULT_FRESHNESS_S
    unsolicited: bool = False

    @property
    def encoded_size(self) -> int:
        return 4 + self.name.encoded_size + self.payload_size


@dataclass(frozen=True, slots=True)
class Indication:
    name: Name

    @property
    def encoded_size(self) -> int:
        return 2 + self.name.encoded_size


@dataclass(frozen=True, slots=True)
class Nack:
    name: Name
    reason: str  # "no-route" or "no-content"

    @property
    def encoded_size(self) -> int:
        return 2 + self.name.encoded_size


IcnMessage = Interest | Data | Indication | Nack


def encode_bundle(messages: list, max_payload: int = DEFAULT_BUNDLE_BUDGET) -> list[list]:
    """Pack messages into frames greedily, first frame that still fits wins."""
    frames: list[list] = []
    spare: list[int] = []
    for msg in messages:
        size = msg.encoded_size
        if size > max_payload:
            raise EncodeError(f"{type(msg).__name__} of {size} B exceeds {max_payload} B frame budget")
        for i, room in enumerate(spare):
            if size <= room:
                frames[i].append(msg)
                spare[i] = room - size
                break
        else:
            frames.append([msg])
            spare.append(max_payload - size)
    return frames


def bundle_size(messages: list) -> int:
    return sum(m.encoded_size for m in messages)


@dataclass(slots=True)
class PitEntry:
    name: Name
    records: list[tuple[str, int]] = field(default_factory=list)
    expiry: float = 0.0

    def faces(self) -> list[str]:
        seen: list[str] = []
        for face, _ in self.records:
            if face not in seen:
                seen.append(face)
        return seen

    def has_nonce(self, nonce: int) -> bool:
        return any(n == nonce for _, n in self.records)


class PitTable:
    """Pending Interests, at most one entry per exact name."""

    def __init__(self):
        self._entries: dict[Name, PitEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, name: Name) -> PitEntry | None:
        return self._entries.get(name)

    def insert(self, interest: Interest, face: str, now: float) -> str:
        """Returns 'new', 'aggregated', or 'duplicate'."""
        entry = self._entries.get(interest.name)
        if entry is not None and entry.expiry <= now:
            del self._entries[interest.name]
            entry = None
        if entry is None:
            entry = PitEntry(interest.name, [(face, interest.nonce)], now + interest.lifetime_s)
            self._entries[interest.name] = entry
            return "new"
        if entry.has_nonce(interest.nonce):
            return "duplicate"
        entry.records.append((face, interest.nonce))
        entry.expiry = max(entry.expiry, now + interest.lifetime_s)
        return "aggregated"

    def remove(self, name: Name) -> None:
        self._entries.pop(name, None)

    def satisfy(self, data_name: Name, now: float) -> list[str]:
        """Consume every live entry whose name prefixes data_name."""
        faces: list[str] = []
        for name in [n for n in self._entries if n.is_prefix_of(data_name)]:
            entry = self._entries.pop(name)
            if entry.expiry > now:
                for f in entry.faces():
                    if f not in faces:
                        faces.append(f)
        return faces

    def expire(self, now: float) -> list[PitEntry]:
        dead = [e for e in self._entries.values() if e.expiry <= now]
        for e in dead:
            del self._entries[e.name]
        return dead


@dataclass(slots=True)
class CsEntry:
    data: Data
    stored_at: float
    ttl: float

    def fresh(self, now: float) -> bool:
        return now < self.stored_at + self.ttl


class ContentStore:
    """LRU content cache with per-entry freshness."""

    def __init__(self, capacity: int = 64):
        self.capacity = capacity
        self._entries: OrderedDict[Name, CsEntry] = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def insert(self, data: Data, now: float) -> None:
        if self.capacity == 0:
            return
        self._entries[data.name] = CsEntry(data, now, data.freshness_s)
        self._entries.move_to_end(data.name)
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)

    def lookup(self, interest_name: Name, now: float) -> Data | None:
        entry = self._entries.get(interest_name)
        if entry is None:
            for name, cand in self._entries.items():
                if interest_name.is_prefix_of(name):
                    entry = cand
                    break
        if entry is None:
            return None
        if not entry.fresh(now):
            del self._entries[entry.data.name]
            return None
        self._entries.move_to_end(entry.data.name)
        return entry.data

    def expire(self, now: float) -> int:
        dead = [n for n, e in self._entries.items() if not e.fresh(now)]
        for n in dead:
            del self._entries[n]
        return len(dead)


@dataclass(slots=True)
class FibEntry:
    prefix: Name
    face: str
    expiry: float


class FibTable:
    """Longest-prefix-match routes with registration expiry."""

    def __init__(self):
        self._entries: dict[Name, FibEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def insert(self, prefix: Name, face: str, expiry: float = float("inf")) -> None:
        self._entries[prefix] = FibEntry(prefix, face, expiry)

    def lookup(self, name: Name, now: float) -> FibEntry | None:
        best: FibEntry | None = None
        for entry in self._entries.values():
            if entry.expiry <= now:
                continue
            if entry.prefix.is_prefix_of(name):
                if best is None or len(entry.prefix) > len(best.prefix):
                    best = entry
        return best

    def expire(self, now: float) -> int:
        dead = [p for p, e in self._entries.items() if e.expiry <= now]
        for p in dead:
            del self._entries[p]
        return len(dead)


class InterestVerdict(Enum):
    CS_HIT = "cs-hit"
    AGGREGATED = "aggregated"
    FORWARD = "forward"
    NO_ROUTE = "no-route"
    DUPLICATE = "duplicate"


class DataVerdict(Enum):
    DELIVERED = "delivered"
    CACHED_UNSOLICITED = "cached-unsolicited"
    DROPPED = "dropped"


@dataclass(frozen=True, slots=True)
class InterestResult:
    verdict: InterestVerdict
    data: Data | None = None
    out_face: str | None = None
    nack: Nack | None = None


@dataclass(frozen=True, slots=True)
class DataResult:
    verdict: DataVerdict
    faces: tuple[str, ...] = ()


class Forwarder:
    """Table-driven forwarding decisions; the owner performs the I/O.

    Only a custodian forwarder (the gateway role) caches unsolicited Data,
    and then only under a currently registered prefix.
    """

    def __init__(self, cs_capacity: int = 64, custodian: bool = False):
        self.pit = PitTable()
        self.cs = ContentStore(cs_capacity)
        self.fib = FibTable()
        self.custodian = custodian

    def process_interest(self, interest: Interest, in_face: str, now: float) -> InterestResult:
        cached = self.cs.lookup(interest.name, now)
        if cached is not None:
            return InterestResult(InterestVerdict.CS_HIT, data=cached)
        outcome = self.pit.insert(interest, in_face, now)
        if outcome == "duplicate":
            return InterestResult(InterestVerdict.DUPLICATE)
        if outcome == "aggregated":
            return InterestResult(InterestVerdict.AGGREGATED)
        route = self.fib.lookup(interest.name, now)
        if route is None:
            self.pit.remove(interest.name)
            return InterestResult(
                InterestVerdict.NO_ROUTE, nack=Nack(interest.name, "no-route")
            )
        return InterestResult(InterestVerdict.FORWARD, out_face=route.face)

    def process_data(self, data: Data, in_face: str, now: float) -> DataResult:
        faces = self.pit.satisfy(data.name, now)
        if faces:
            self.cs.insert(data, now)
            return DataResult(DataVerdict.DELIVERED, tuple(f for f in faces if f != in_face))
        if data.unsolicited and self.custodian and self.fib.lookup(data.name, now) is not None:
            self.cs.insert(data, now)
            return DataResult(DataVerdict.CACHED_UNSOLICITED)
        return DataResult(DataVerdict.DROPPED)

    def expire_tables(self, now: float) -> list[PitEntry]:
        expired = self.pit.expire(now)
        self.cs.expire(now)
        self.fib.expire(now)
        return expired
