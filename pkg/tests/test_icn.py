"""Name encoding, table semantics, forwarding decisions, bundle packing."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loricn.errors import EncodeError
from loricn.icn import (
    ContentStore,
    Data,
    DataVerdict,
    FibTable,
    Forwarder,
    Indication,
    Interest,
    InterestVerdict,
    Name,
    PitTable,
    encode_bundle,
)


def name(text: str) -> Name:
    return Name.parse(text)


def interest(text: str, nonce: int = 1, lifetime: float = 100.0, face: str = "app") -> Interest:
    return Interest(name(text), nonce, lifetime, face)


class TestName:
    def test_encoded_size_counts_bytes_plus_component_overhead(self):
        n = name("/lora/n007/i00042")
        assert n.components == ("lora", "n007", "i00042")
        assert n.encoded_size == 17
        assert Interest(n, 1, 10.0).encoded_size == 19
        short = name("/dl/i00042")
        assert short.encoded_size == 10
        assert Data(short, payload_size=2).encoded_size == 16
        assert Indication(n).encoded_size == 19

    def test_prefix_relation(self):
        assert name("/a/b").is_prefix_of(name("/a/b/c"))
        assert name("/a/b").is_prefix_of(name("/a/b"))
        assert not name("/a/b/c").is_prefix_of(name("/a/b"))
        assert not name("/a/x").is_prefix_of(name("/a/b/c"))

    def test_round_trip(self):
        assert str(name("/a/b/c")) == "/a/b/c"
        with pytest.raises(ValueError):
            Name(())


class TestBundle:
    def test_five_small_interests_fill_one_frame(self):
        msgs = [interest(f"/sensor/x/val{i:03d}", nonce=i) for i in range(5)]
        assert all(m.encoded_size == 18 for m in msgs)
        frames = encode_bundle(msgs, 100)
        assert len(frames) == 1
        assert sum(m.encoded_size for m in frames[0]) == 90

    def test_seven_items_spill_into_second_frame(self):
        msgs = [interest(f"/sensor/x/val{i:03d}", nonce=i) for i in range(7)]
        frames = encode_bundle(msgs, 100)
        assert [len(f) for f in frames] == [5, 2]

    def test_empty_and_oversized(self):
        assert encode_bundle([], 100) == []
        big = Data(name("/x"), payload_size=200)
        with pytest.raises(EncodeError):
            encode_bundle([big], 100)

    @given(
        sizes=st.lists(st.integers(1, 60), max_size=30),
        budget=st.integers(60, 120),
    )
    def test_packing_is_complete_and_within_budget(self, sizes, budget):
        msgs = [Data(name("/q"), payload_size=s - 6) for s in sizes if s >= 7]
        frames = encode_bundle(msgs, budget)
        packed = [m for f in frames for m in f]
        assert sorted(id(m) for m in packed) == sorted(id(m) for m in msgs)
        for f in frames:
            assert sum(m.encoded_size for m in f) <= budget


class TestPit:
    def test_aggregation_and_duplicate_suppression(self):
        pit = PitTable()
        assert pit.insert(interest("/a/b", nonce=10), "f1", now=0.0) == "new"
        assert pit.insert(interest("/a/b", nonce=11), "f2", now=1.0) == "aggregated"
        assert pit.insert(interest("/a/b", nonce=10), "f3", now=2.0) == "duplicate"
        faces = pit.satisfy(name("/a/b"), now=3.0)
        assert faces == ["f1", "f2"]
        assert len(pit) == 0

    def test_prefix_entries_consumed_by_longer_data_name(self):
        pit = PitTable()
        pit.insert(interest("/a/b"), "f1", now=0.0)
        assert pit.satisfy(name("/a/b/version7"), now=1.0) == ["f1"]

    def test_expiry_removes_and_reports(self):
        pit = PitTable()
        pit.insert(interest("/a", lifetime=5.0), "f1", now=0.0)
        pit.insert(interest("/b", lifetime=50.0), "f1", now=0.0)
        dead = pit.expire(now=6.0)
        assert [e.name for e in dead] == [name("/a")]
        assert pit.satisfy(name("/b"), now=7.0) == ["f1"]

    def test_expired_entry_does_not_claim_duplicate(self):
        pit = PitTable()
        pit.insert(interest("/a", nonce=5, lifetime=1.0), "f1", now=0.0)
        assert pit.insert(interest("/a", nonce=5, lifetime=1.0), "f1", now=2.0) == "new"


class TestContentStore:
    def test_lru_eviction_order(self):
        cs = ContentStore(capacity=2)
        cs.insert(Data(name("/a"), 1), now=0.0)
        cs.insert(Data(name("/b"), 1), now=1.0)
        assert cs.lookup(name("/a"), now=2.0) is not None
        cs.insert(Data(name("/c"), 1), now=3.0)
        assert cs.lookup(name("/b"), now=4.0) is None
        assert cs.lookup(name("/a"), now=4.0) is not None
        assert cs.lookup(name("/c"), now=4.0) is not None

    def test_freshness_expiry_is_lazy_but_strict(self):
        cs = ContentStore(capacity=4)
        cs.insert(Data(name("/a"), 1, freshness_s=300.0), now=0.0)
        assert cs.lookup(name("/a"), now=299.9) is not None
        assert cs.lookup(name("/a"), now=300.0) is None
        assert len(cs) == 0

    def test_prefix_lookup(self):
        cs = ContentStore(capacity=4)
        cs.insert(Data(name("/a/b/c"), 1), now=0.0)
        hit = cs.lookup(name("/a/b"), now=1.0)
        assert hit is not None and hit.name == name("/a/b/c")
        assert cs.lookup(name("/a/x"), now=1.0) is None

    @settings(max_examples=100, deadline=None)
    @given(
        ops=st.lists(
            st.tuples(st.integers(0, 9), st.floats(1.0, 50.0), st.floats(0.0, 200.0)),
            min_size=1,
            max_size=50,
        )
    )
    def test_never_serves_expired_content(self, ops):
        cs = ContentStore(capacity=4)
        stored: dict[str, tuple[float, float]] = {}
        t = 0.0
        for idx, ttl, gap in ops:
            t += gap
            key = f"/item/{idx}"
            cs.insert(Data(name(key), 1, freshness_s=ttl), now=t)
            stored[key] = (t, ttl)
            probe = f"/item/{(idx + 3) % 10}"
            got = cs.lookup(name(probe), now=t)
            if got is not None:
                at, life = stored[probe]
                assert t < at + life


class TestFib:
    def test_longest_prefix_wins(self):
        fib = FibTable()
        fib.insert(name("/a"), "coarse")
        fib.insert(name("/a/b"), "fine")
        assert fib.lookup(name("/a/b/c"), now=0.0).face == "fine"
        assert fib.lookup(name("/a/z"), now=0.0).face == "coarse"
        assert fib.lookup(name("/other"), now=0.0) is None

    def test_registration_expiry(self):
        fib = FibTable()
        fib.insert(name("/a"), "f", expiry=100.0)
        assert fib.lookup(name("/a/x"), now=99.0) is not None
        assert fib.lookup(name("/a/x"), now=100.0) is None
        fib.insert(name("/a"), "f", expiry=200.0)
        assert fib.lookup(name("/a/x"), now=150.0) is not None


class TestForwarder:
    def _gw(self) -> Forwarder:
        fwd = Forwarder(cs_capacity=64, custodian=True)
        fwd.fib.insert(name("/lora/n001"), "radio:1", expiry=3600.0)
        return fwd

    def test_cs_hit_short_circuits(self):
        fwd = self._gw()
        fwd.cs.insert(Data(name("/lora/n001/i1"), 8), now=0.0)
        res = fwd.process_interest(interest("/lora/n001/i1"), "internet", now=1.0)
        assert res.verdict is InterestVerdict.CS_HIT
        assert res.data.name == name("/lora/n001/i1")
        assert len(fwd.pit) == 0

    def test_forward_then_aggregate_then_duplicate(self):
        fwd = self._gw()
        first = fwd.process_interest(interest("/lora/n001/i2", nonce=1), "internet", 0.0)
        assert first.verdict is InterestVerdict.FORWARD
        assert first.out_face == "radio:1"
        second = fwd.process_interest(interest("/lora/n001/i2", nonce=2), "f2", 1.0)
        assert second.verdict is InterestVerdict.AGGREGATED
        third = fwd.process_interest(interest("/lora/n001/i2", nonce=1), "f3", 2.0)
        assert third.verdict is InterestVerdict.DUPLICATE

    def test_no_route_produces_nack_and_leaves_no_state(self):
        fwd = self._gw()
        res = fwd.process_interest(interest("/unknown/x"), "internet", 0.0)
        assert res.verdict is InterestVerdict.NO_ROUTE
        assert res.nack.reason == "no-route"
        assert len(fwd.pit) == 0

    def test_data_fans_out_and_is_cached(self):
        fwd = self._gw()
        fwd.process_interest(interest("/lora/n001/i3", nonce=1, face="fa"), "fa", 0.0)
        fwd.process_interest(interest("/lora/n001/i3", nonce=2, face="fb"), "fb", 0.0)
        fwd.process_interest(interest("/lora/n001/i3", nonce=3, face="fc"), "fc", 0.0)
        res = fwd.process_data(Data(name("/lora/n001/i3"), 8), "radio:1", 1.0)
        assert res.verdict is DataVerdict.DELIVERED
        assert set(res.faces) == {"fa", "fb", "fc"}
        assert len(fwd.pit) == 0
        again = fwd.process_data(Data(name("/lora/n001/i3"), 8), "radio:1", 2.0)
        assert again.verdict is DataVerdict.DROPPED
        hit = fwd.process_interest(interest("/lora/n001/i3", nonce=9), "fd", 3.0)
        assert hit.verdict is InterestVerdict.CS_HIT

    def test_unsolicited_data_cached_only_by_custodian_with_route(self):
        gw = self._gw()
        pushed = Data(name("/lora/n001/i4"), 8, unsolicited=True)
        assert gw.process_data(pushed, "radio:1", 0.0).verdict is DataVerdict.CACHED_UNSOLICITED
        unknown = Data(name("/alien/x"), 8, unsolicited=True)
        assert gw.process_data(unknown, "radio:9", 0.0).verdict is DataVerdict.DROPPED
        node = Forwarder(cs_capacity=8, custodian=False)
        node.fib.insert(name("/lora/n001"), "radio")
        assert node.process_data(pushed, "radio", 0.0).verdict is DataVerdict.DROPPED

    def test_expire_tables_returns_timed_out_interests(self):
        fwd = self._gw()
        fwd.process_interest(interest("/lora/n001/i5", lifetime=10.0), "internet", 0.0)
        expired = fwd.expire_tables(now=10.0)
        assert [e.name for e in expired] == [name("/lora/n001/i5")]
        assert fwd.expire_tables(now=11.0) == []

    def test_delivery_excludes_arrival_face(self):
        fwd = self._gw()
        fwd.process_interest(interest("/lora/n001/i6", nonce=1), "fa", 0.0)
        res = fwd.process_data(Data(name("/lora/n001/i6"), 8), "fa", 1.0)
        assert res.verdict is DataVerdict.DELIVERED
        assert res.faces == ()
