"""Convergence layer: ICN forwarding over the LoRa MAC, per mapping scheme.

The gateway owns the network-facing forwarder (PIT, CS, FIB, custodian
store) and speaks for a zero-latency internet consumer and producer.
Nodes hold a producer application store, a consumer PIT for downstream
requests, and the per-scheme glue that picks a MAC carrier for every
message they emit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .engine import Simulator
from .errors import ConfigError
from .icn import (
    Data,
    Indication,
    Interest,
    InterestVerdict,
    DataVerdict,
    Forwarder,
    Name,
    PitTable,
)
from .mac import (
    BROADCAST,
    GatewayMac,
    GtsCell,
    MacEntity,
    MacFrame,
    SuperframeConfig,
)
from .phy import DutyCycleLedger, Medium, PhyConfig, Transmission
from .schemes import MappingScheme, allocation_plan

GATEWAY_ID = 0
BUNDLE_BUDGET_BYTES = 100
CONTENT_FRESHNESS_S = 300.0

# Gateway radio turnaround between finishing one contention transmission
# and arming the next.  Half a sensing unit, so the gateway's backoff
# lattice never lines up with stations that reacted to the frame it just
# sent.
GATEWAY_TURNAROUND_S = 0.005


def node_prefix(node_id: int) -> Name:
    return Name(("lora", f"n{node_id:03d}"))


def upstream_item(node_id: int, index: int) -> Name:
    return Name(("lora", f"n{node_id:03d}", f"i{index:05d}"))


def downstream_item(index: int) -> Name:
    return Name(("dl", f"i{index:05d}"))


def registration_name(node_id: int) -> Name:
    return Name(("reg", f"n{node_id:03d}"))


@dataclass(frozen=True, slots=True)
class NetworkParams:
    n_nodes: int
    scheme: MappingScheme
    content_interval_mean_s: float = 60.0
    duration_s: float = 7200.0
    seed: int = 0
    retransmissions: bool = False
    retx_timeout_s: float | None = None  # defaults to one beacon interval
    retx_max: int = 3
    link_acks: bool = True  # unicast contention frames carry link-layer acks
    superframe: SuperframeConfig = SuperframeConfig()
    phy: PhyConfig = PhyConfig()
    upstream_payload_bytes: int = 32
    downstream_payload_bytes: int = 2
    registration_lifetime_s: float = 3600.0
    node_pit_lifetime_s: float = 600.0
    gateway_lifetime_per_node_s: float = 10.0
    queue_capacity: int = 8
    cs_capacity: int = 1024

    def __post_init__(self) -> None:
        if self.n_nodes < 1:
            raise ConfigError("at least one node is required")
        if self.content_interval_mean_s <= 0 or self.duration_s <= 0:
            raise ConfigError("intervals and durations must be positive")
        if self.retx_max < 0:
            raise ConfigError("retransmission cap cannot be negative")


@dataclass(slots=True)
class Transaction:
    key: str
    name: Name
    node: int
    created_s: float
    status: str = "pending"  # "pending" | "delivered" | "lost"
    delivered_s: float | None = None
    retx_used: int = 0

    @property
    def latency_s(self) -> float | None:
        if self.delivered_s is None:
            return None
        return self.delivered_s - self.created_s


class Metrics:
    """Omniscient per-transaction ledger, keyed by (name, consumer node)."""

    def __init__(self) -> None:
        self.transactions: list[Transaction] = []
        self._index: dict[tuple[Name, int], Transaction] = {}
        self.retransmissions = 0

    def create(self, name: Name, consumer: int, now: float) -> Transaction:
        key = f"{name}@{consumer}"
        txn = Transaction(key, name, consumer, now)
        self.transactions.append(txn)
        self._index[(name, consumer)] = txn
        return txn

    def lookup(self, name: Name, consumer: int) -> Transaction | None:
        return self._index.get((name, consumer))

    def deliver(self, name: Name, consumer: int, now: float) -> None:
        txn = self._index.get((name, consumer))
        if txn is not None and txn.status == "pending":
            txn.status = "delivered"
            txn.delivered_s = now

    def lose(self, name: Name, consumer: int) -> None:
        txn = self._index.get((name, consumer))
        if txn is not None and txn.status == "pending":
            txn.status = "lost"


class GatewayHost:
    """Gateway application: forwarder, internet faces, beacon content."""

    def __init__(
        self,
        sim: Simulator,
        mac: GatewayMac,
        scheme: MappingScheme,
        params: NetworkParams,
        metrics: Metrics,
        rx_cells_by_node: dict[int, list[GtsCell]],
    ):
        self.sim = sim
        self.mac = mac
        self.scheme = scheme
        self.params = params
        self.metrics = metrics
        self.rx_cells_by_node = rx_cells_by_node
        self.forwarder = Forwarder(cs_capacity=params.cs_capacity, custodian=True)
        self.forwarder.fib.insert(Name(("dl",)), "internet")
        self.registered: set[int] = set()
        self.registrations_seen = 0
        self.beacon_queue: list[tuple[Interest | Data, float]] = []
        self.indirect_queue: list[tuple[int, Interest]] = []
        self._pending_batch: list[tuple[int, Interest]] = []
        self._cap_backlog: deque[MacFrame] = deque()
        self._drain_scheduled = False
        self._pull_backlog: dict[int, deque[Name]] = {}
        self._pull_open: dict[int, int] = {}
        self._nonce = 0
        self._retx_timeout = (
            params.retx_timeout_s
            if params.retx_timeout_s is not None
            else params.superframe.beacon_interval_s
        )
        mac.on_receive = self._on_frame
        mac.beacon_source = self._beacon_source
        mac.on_beacon_sent = self._on_beacon_sent
        mac.on_sent = self._on_mac_outcome
        mac.on_failed = self._on_mac_outcome

    def next_nonce(self) -> int:
        self._nonce += 1
        return self._nonce

    def interest_lifetime_s(self) -> float:
        return self.params.gateway_lifetime_per_node_s * max(1, len(self.registered))

    # -- internet consumer (upstream pull and indications) -------------------

    def consumer_want(self, name: Name) -> None:
        lifetime = self.interest_lifetime_s()
        self._issue_interest(name, lifetime)
        self._arm_consumer(name, lifetime)

    def _issue_interest(self, name: Name, lifetime: float) -> None:
        interest = Interest(name, nonce=self.next_nonce(), lifetime_s=lifetime)
        result = self.forwarder.process_interest(interest, "internet", self.sim.now)
        if result.verdict == InterestVerdict.CS_HIT:
            self.metrics.deliver(name, GATEWAY_ID, self.sim.now)
            return
        if result.verdict in (InterestVerdict.FORWARD, InterestVerdict.AGGREGATED):
            # retransmissions re-enter here and must hit the air even when
            # the PIT aggregated them into the original entry
            self._dispatch_interest(interest)

    def _arm_consumer(self, name: Name, lifetime: float) -> None:
        self._consumer_chain(
            name,
            GATEWAY_ID,
            lifetime,
            resend=lambda: self._issue_interest(name, self.interest_lifetime_s()),
        )

    def _consumer_chain(self, name: Name, consumer: int, lifetime: float, resend) -> None:
        params = self.params
        sim = self.sim
        metrics = self.metrics
        timeout = self._retx_timeout

        def lost() -> None:
            metrics.lose(name, consumer)

        def fire() -> None:
            txn = metrics.lookup(name, consumer)
            if txn is None or txn.status != "pending":
                return
            if params.retransmissions and txn.retx_used < params.retx_max:
                txn.retx_used += 1
                metrics.retransmissions += 1
                resend()
                sim.schedule(sim.now + timeout, "consumer-retx", str(name), fire)
            else:
                remaining = max(lifetime - timeout, 0.0)
                sim.schedule(sim.now + remaining, "consumer-expiry", str(name), lost)

        if params.retransmissions and params.retx_max > 0:
            sim.schedule(sim.now + timeout, "consumer-retx", str(name), fire)
        else:
            sim.schedule(sim.now + lifetime, "consumer-expiry", str(name), lost)

    # -- carrier dispatch ------------------------------------------------------

    def _face_node(self, face: str) -> int:
        return int(face.split(":", 1)[1])

    def _cap_send(self, frame: MacFrame) -> None:
        self._cap_backlog.append(frame)
        self._schedule_drain()

    def _schedule_drain(self) -> None:
        if self._drain_scheduled or not self._cap_backlog:
            return
        self._drain_scheduled = True
        self.sim.schedule(
            self.sim.now + GATEWAY_TURNAROUND_S, "gw-cap-drain", "gw", self._drain_cap
        )

    def _drain_cap(self) -> None:
        # One frame per MAC outcome keeps the contention queue shallow; a
        # full queue leaves the head in place until the next outcome.
        self._drain_scheduled = False
        if self._cap_backlog and self.mac.enqueue(self._cap_backlog[0]):
            self._cap_backlog.popleft()

    def _on_mac_outcome(self, frame: MacFrame, info: str) -> None:
        if (
            frame.carrier == "CFP"
            and frame.dst in self._pull_open
            and any(isinstance(m, Interest) for m in frame.messages)
        ):
            self._pull_open[frame.dst] -= 1
            self._pull_topup(frame.dst)
        self._schedule_drain()

    def _pull_enqueue(self, node: int, name: Name) -> None:
        self._pull_backlog.setdefault(node, deque()).append(name)
        self._pull_open.setdefault(node, 0)
        self._pull_topup(node)

    def _pull_topup(self, node: int) -> None:
        # Interests are minted one reserved-cell visit ahead of transmission,
        # so the lifetime clock never runs down inside the downlink queue.
        backlog = self._pull_backlog.get(node)
        while backlog and self._pull_open[node] < 1:
            interest = Interest(
                backlog[0], nonce=self.next_nonce(), lifetime_s=self.interest_lifetime_s()
            )
            frame = MacFrame(src=GATEWAY_ID, dst=node, carrier="CFP", messages=(interest,))
            if not self.mac.downlink_enqueue(node, frame, self.rx_cells_by_node.get(node, [])):
                break
            backlog.popleft()
            self._pull_open[node] += 1

    def _dispatch_interest(self, interest: Interest) -> None:
        carrier = self.scheme.interest_carrier
        if carrier == "BEACON-PAYLOAD":
            self._bundle_enqueue(interest, interest.lifetime_s)
            return
        route = self.forwarder.fib.lookup(interest.name, self.sim.now)
        if route is None or not route.face.startswith("lora:"):
            return
        node = self._face_node(route.face)
        if carrier == "BEACON-INDIRECT-CAP":
            self.indirect_queue.append((node, interest))
        elif carrier == "CAP":
            frame = MacFrame(
                src=GATEWAY_ID,
                dst=node,
                carrier="CAP",
                messages=(interest,),
                ack_requested=self.params.link_acks,
            )
            self._cap_send(frame)
        elif carrier == "CFP":
            self._pull_enqueue(node, interest.name)

    def _send_data_down(self, data: Data, faces: tuple[str, ...]) -> None:
        carrier = self.scheme.data_carrier
        if carrier == "BEACON-PAYLOAD":
            if all(q.name != data.name for q, _ in self.beacon_queue if isinstance(q, Data)):
                self._bundle_enqueue(data, self.params.node_pit_lifetime_s)
            return
        for face in faces:
            if not face.startswith("lora:"):
                continue
            node = self._face_node(face)
            if carrier == "CFP":
                frame = MacFrame(src=GATEWAY_ID, dst=node, carrier="CFP", messages=(data,))
                self.mac.downlink_enqueue(node, frame, self.rx_cells_by_node.get(node, []))
            else:
                frame = MacFrame(
                    src=GATEWAY_ID,
                    dst=node,
                    carrier="CAP",
                    messages=(data,),
                    ack_requested=self.params.link_acks,
                )
                self._cap_send(frame)

    # -- beacon content ---------------------------------------------------------

    def _bundle_enqueue(self, msg: Interest | Data, ttl_s: float) -> None:
        self.beacon_queue.append((msg, self.sim.now + ttl_s))

    def _take_bundle_prefix(self) -> tuple:
        taken = []
        total = 0
        now = self.sim.now
        while self.beacon_queue:
            msg, deadline = self.beacon_queue[0]
            if deadline <= now:
                # a dead entry never rides: its requesters have timed out
                self.beacon_queue.pop(0)
                continue
            if total + msg.encoded_size > BUNDLE_BUDGET_BYTES:
                break
            total += msg.encoded_size
            taken.append(self.beacon_queue.pop(0)[0])
        return tuple(taken)

    def _beacon_source(self) -> tuple[tuple[int, ...], tuple]:
        if self._pending_batch:
            self.indirect_queue = self._pending_batch + self.indirect_queue
        self._pending_batch = list(self.indirect_queue)
        self.indirect_queue = []
        pending = tuple(sorted({node for node, _ in self._pending_batch}))
        return pending, self._take_bundle_prefix()

    def _on_beacon_sent(self, frame: MacFrame) -> None:
        batch, self._pending_batch = self._pending_batch, []
        for node, interest in batch:
            cap_frame = MacFrame(
                src=GATEWAY_ID,
                dst=node,
                carrier="CAP",
                messages=(interest,),
                ack_requested=self.params.link_acks,
            )
            self._cap_send(cap_frame)

    # -- reception -----------------------------------------------------------------

    def _on_frame(self, frame: MacFrame) -> None:
        for msg in frame.messages:
            if isinstance(msg, Interest):
                if msg.name.components[0] == "reg":
                    self._register(frame.src)
                else:
                    self._downstream_interest(msg, frame.src)
            elif isinstance(msg, Data):
                self._upstream_data(msg)
            elif isinstance(msg, Indication):
                self.consumer_want(msg.name)

    def _register(self, node: int) -> None:
        self.forwarder.fib.insert(
            node_prefix(node),
            f"lora:{node}",
            self.sim.now + self.params.registration_lifetime_s,
        )
        self.registered.add(node)
        self.registrations_seen += 1

    def _downstream_interest(self, interest: Interest, src: int) -> None:
        face = f"lora:{src}"
        result = self.forwarder.process_interest(interest, face, self.sim.now)
        if result.verdict == InterestVerdict.CS_HIT:
            self._send_data_down(result.data, (face,))
        elif result.verdict == InterestVerdict.FORWARD and result.out_face == "internet":
            data = Data(
                interest.name,
                payload_size=self.params.downstream_payload_bytes,
                freshness_s=CONTENT_FRESHNESS_S,
            )
            answer = self.forwarder.process_data(data, "internet", self.sim.now)
            if answer.verdict == DataVerdict.DELIVERED:
                self._send_data_down(data, answer.faces)

    def _upstream_data(self, data: Data) -> None:
        result = self.forwarder.process_data(data, "lora", self.sim.now)
        if result.verdict == DataVerdict.DELIVERED and "internet" in result.faces:
            self.metrics.deliver(data.name, GATEWAY_ID, self.sim.now)
        elif result.verdict == DataVerdict.CACHED_UNSOLICITED:
            self.metrics.deliver(data.name, GATEWAY_ID, self.sim.now)
        elif result.verdict == DataVerdict.DROPPED and self.scheme.push:
            # arrived before the producer's prefix was registered
            self.metrics.lose(data.name, GATEWAY_ID)


class NodeHost:
    """Node application: producer store, downstream consumer, carrier glue."""

    def __init__(
        self,
        sim: Simulator,
        mac: MacEntity,
        node_id: int,
        scheme: MappingScheme,
        params: NetworkParams,
        metrics: Metrics,
    ):
        self.sim = sim
        self.mac = mac
        self.node_id = node_id
        self.scheme = scheme
        self.params = params
        self.metrics = metrics
        self.prefix = node_prefix(node_id)
        self.producer_store: dict[Name, Data] = {}
        self.pit = PitTable()
        self._nonce = 0
        self._backlog: deque[MacFrame] = deque()
        self._retx_timeout = (
            params.retx_timeout_s
            if params.retx_timeout_s is not None
            else params.superframe.beacon_interval_s
        )
        mac.on_receive = self._on_frame
        mac.on_sent = self._on_mac_sent
        mac.on_failed = self._on_mac_failed

    def next_nonce(self) -> int:
        self._nonce += 1
        return self._nonce

    # -- producer side ---------------------------------------------------------

    def produce(self, name: Name) -> None:
        data = Data(
            name,
            payload_size=self.params.upstream_payload_bytes,
            freshness_s=CONTENT_FRESHNESS_S,
            unsolicited=self.scheme.push,
        )
        self.producer_store[name] = data
        if self.scheme.push:
            self._send_upstream((data,), self.scheme.data_carrier)
        elif self.scheme.indication_carrier != "none":
            self._send_upstream((Indication(name),), self.scheme.indication_carrier)

    def _answer_interest(self, interest: Interest) -> None:
        data = self.producer_store.get(interest.name)
        if data is None:
            return
        self._send_upstream((data,), self.scheme.data_carrier)

    def _send_upstream(self, messages: tuple, carrier: str) -> None:
        ack = carrier == "CAP" and self.params.link_acks
        frame = MacFrame(
            src=self.node_id,
            dst=GATEWAY_ID,
            carrier=carrier,
            messages=messages,
            ack_requested=ack,
        )
        self._backlog.append(frame)
        self._drain_backlog()

    def _drain_backlog(self) -> None:
        # The application holds frames the link queue cannot take yet, so a
        # traffic burst delays content instead of dropping it.
        while self._backlog and self.mac.enqueue(self._backlog[0]):
            self._backlog.popleft()

    def _on_mac_sent(self, frame: MacFrame, info: str) -> None:
        self._drain_backlog()

    # -- downstream consumer ------------------------------------------------------

    def request(self, name: Name) -> None:
        lifetime = self.params.node_pit_lifetime_s
        self._send_request(name, lifetime)
        self._arm_consumer(name, lifetime)

    def _send_request(self, name: Name, lifetime: float) -> None:
        interest = Interest(name, nonce=self.next_nonce(), lifetime_s=lifetime)
        self.pit.insert(interest, "app", self.sim.now)
        self._send_upstream((interest,), self.scheme.interest_carrier)

    def _arm_consumer(self, name: Name, lifetime: float) -> None:
        params = self.params
        sim = self.sim
        metrics = self.metrics
        timeout = self._retx_timeout
        consumer = self.node_id

        def lost() -> None:
            metrics.lose(name, consumer)

        def fire() -> None:
            txn = metrics.lookup(name, consumer)
            if txn is None or txn.status != "pending":
                return
            if params.retransmissions and txn.retx_used < params.retx_max:
                txn.retx_used += 1
                metrics.retransmissions += 1
                self._send_request(name, params.node_pit_lifetime_s)
                sim.schedule(sim.now + timeout, "consumer-retx", str(name), fire)
            else:
                remaining = max(lifetime - timeout, 0.0)
                sim.schedule(sim.now + remaining, "consumer-expiry", str(name), lost)

        if params.retransmissions and params.retx_max > 0:
            sim.schedule(sim.now + timeout, "consumer-retx", str(name), fire)
        else:
            sim.schedule(sim.now + lifetime, "consumer-expiry", str(name), lost)

    # -- registration ----------------------------------------------------------------

    def register(self) -> None:
        interest = Interest(
            registration_name(self.node_id),
            nonce=self.next_nonce(),
            lifetime_s=self.params.registration_lifetime_s,
        )
        carrier = "CFP" if self.mac.tx_cells else "CAP"
        ack = carrier == "CAP" and self.params.link_acks
        frame = MacFrame(
            src=self.node_id,
            dst=GATEWAY_ID,
            carrier=carrier,
            messages=(interest,),
            ack_requested=ack,
        )
        # control traffic jumps content queues so a refresh cannot starve
        # behind a burst and open a routing hole
        if not self.mac.enqueue(frame, priority=True):
            self._backlog.appendleft(frame)

    # -- reception ----------------------------------------------------------------------

    def _on_frame(self, frame: MacFrame) -> None:
        for msg in frame.messages:
            if isinstance(msg, Interest):
                if self.prefix.is_prefix_of(msg.name):
                    self._answer_interest(msg)
            elif isinstance(msg, Data):
                faces = self.pit.satisfy(msg.name, self.sim.now)
                if "app" in faces:
                    self.metrics.deliver(msg.name, self.node_id, self.sim.now)

    def _on_mac_failed(self, frame: MacFrame, reason: str) -> None:
        for msg in frame.messages:
            if isinstance(msg, Indication):
                self.metrics.lose(msg.name, GATEWAY_ID)
            elif isinstance(msg, Data) and self.scheme.push:
                self.metrics.lose(msg.name, GATEWAY_ID)
            elif isinstance(msg, Interest) and msg.name.components[0] == "reg":
                self.sim.schedule(
                    self.sim.now + 60.0, "reg-retry", f"n{self.node_id}", self.register
                )
        self._drain_backlog()


@dataclass(slots=True)
class NetworkResult:
    transactions: list[Transaction]
    radio_on_by_node: dict[int, float]
    retransmissions: int
    queue_drops: int
    duty_denials: int
    beacons_sent: int
    frames_sent: int
    frames_collided: int
    frames_delivered: int
    registrations: int


class Network:
    """One gateway, n nodes, shared medium, scheme-driven traffic."""

    def __init__(self, params: NetworkParams):
        self.params = params
        self.scheme = params.scheme
        self.sim = Simulator(seed=params.seed)
        self.medium = Medium(self.sim)
        self.medium.on_doomed = self._on_doomed
        self.ledger = DutyCycleLedger()
        self.metrics = Metrics()
        cfg = params.superframe

        plan = allocation_plan(self.scheme)
        self.schedule = plan.build(params.n_nodes, cfg)

        self.gateway_mac = GatewayMac(
            self.sim,
            self.medium,
            GATEWAY_ID,
            cfg,
            params.phy,
            self.ledger,
            queue_capacity=params.queue_capacity,
        )
        rx_cells_by_node = {
            i: self.schedule.owned(i, "rx") for i in range(1, params.n_nodes + 1)
        }
        self.gateway = GatewayHost(
            self.sim, self.gateway_mac, self.scheme, params, self.metrics, rx_cells_by_node
        )

        self.nodes: dict[int, NodeHost] = {}
        for i in range(1, params.n_nodes + 1):
            mac = MacEntity(
                self.sim,
                self.medium,
                i,
                cfg,
                params.phy,
                self.ledger,
                queue_capacity=params.queue_capacity,
                cap_rx=self.scheme.node_cap_rx,
            )
            mac.set_cells(self.schedule.owned(i, "tx"), self.schedule.owned(i, "rx"))
            self.nodes[i] = NodeHost(self.sim, mac, i, self.scheme, params, self.metrics)

        for node in self.nodes.values():
            node.mac.start()
        self.gateway_mac.start()
        self._schedule_registrations()
        self._schedule_traffic()

    # -- ground-truth loss for fire-and-forget terminal frames -----------------

    def _on_doomed(self, tx: Transmission) -> None:
        frame = tx.frame
        if not isinstance(frame, MacFrame) or frame.ack_requested or frame.kind != "data":
            return
        for msg in frame.messages:
            if isinstance(msg, Indication):
                self.metrics.lose(msg.name, GATEWAY_ID)
            elif isinstance(msg, Data) and self.scheme.push:
                self.metrics.lose(msg.name, GATEWAY_ID)

    # -- traffic ------------------------------------------------------------------

    def _schedule_registrations(self) -> None:
        bi = self.params.superframe.beacon_interval_s
        for i, node in self.nodes.items():
            stream = self.sim.stream(f"assoc/{i}")
            first = stream.uniform(0.0, bi)
            self.sim.schedule(first, "reg-bootstrap", f"n{i}", self._registration_loop(node, stream))

    def _registration_loop(self, node: NodeHost, stream):
        def refresh() -> None:
            node.register()
            gap = self.params.registration_lifetime_s - stream.uniform(0.0, 60.0)
            if self.sim.now + gap < self.params.duration_s:
                self.sim.schedule(self.sim.now + gap, "reg-refresh", f"n{node.node_id}", refresh)

        return refresh

    def _schedule_traffic(self) -> None:
        if self.scheme.direction == "upstream":
            for i, node in self.nodes.items():
                self._schedule_production(node, self.sim.stream(f"content/{i}"))
        else:
            self._schedule_downstream_requests()

    def _schedule_production(self, node: NodeHost, stream) -> None:
        counter = {"k": 0}

        def produce() -> None:
            counter["k"] += 1
            name = upstream_item(node.node_id, counter["k"])
            self.metrics.create(name, GATEWAY_ID, self.sim.now)
            node.produce(name)
            if not self.scheme.push and self.scheme.indication_carrier == "none":
                self.gateway.consumer_want(name)
            nxt = self.sim.now + stream.exponential(self.params.content_interval_mean_s)
            if nxt < self.params.duration_s:
                self.sim.schedule(nxt, "produce", f"n{node.node_id}", produce)

        first = stream.exponential(self.params.content_interval_mean_s)
        if first < self.params.duration_s:
            self.sim.schedule(first, "produce", f"n{node.node_id}", produce)

    def _schedule_downstream_requests(self) -> None:
        interval = self.params.content_interval_mean_s

        def request_round(k: int) -> None:
            name = downstream_item(k)
            for i, node in self.nodes.items():
                self.metrics.create(name, i, self.sim.now)
                node.request(name)
            if (k + 1) * interval < self.params.duration_s:
                self.sim.schedule((k + 1) * interval, "request", "all", lambda: request_round(k + 1))

        if interval < self.params.duration_s:
            self.sim.schedule(interval, "request", "all", lambda: request_round(1))

    # -- run ---------------------------------------------------------------------------

    def run(self) -> NetworkResult:
        self.sim.run_until(self.params.duration_s)
        queue_drops = self.gateway_mac.counters.queue_drops + sum(
            n.mac.counters.queue_drops for n in self.nodes.values()
        )
        return NetworkResult(
            transactions=self.metrics.transactions,
            radio_on_by_node={i: n.mac.radio_on_s for i, n in self.nodes.items()},
            retransmissions=self.metrics.retransmissions,
            queue_drops=queue_drops,
            duty_denials=self.ledger.denials,
            beacons_sent=self.gateway_mac.beacons_sent,
            frames_sent=self.medium.frames_sent,
            frames_collided=self.medium.frames_collided,
            frames_delivered=self.medium.frames_delivered,
            registrations=self.gateway.registrations_seen,
        )
