import random
import threading

import pytest
from scipy import stats

from ariadne.crypto import derive_temp_keys, encrypt_pattern
from ariadne.data_protocol import Drop, DropReason, Forward, Hop, NodeContext, create_packet, process_packet
from ariadne.deployment import DEFAULT_PATTERN, ELEMENT_SIZE
from ariadne.errors import ReplayError, TableFullError
from ariadne.key_reference import PatternTable

PI = DEFAULT_PATTERN


def prefix_of(k, t):
    return encrypt_pattern(derive_temp_keys(k, t).enc, PI)


def test_window_of_one():
    k = bytes(range(32))
    table = PatternTable()
    sid = table.register_session(k, PI, 1)
    assert len(table) == 1
    [cand] = table.lookup(prefix_of(k, 0))
    assert (cand.session_id, cand.t, cand.keys) == (sid, 0, derive_temp_keys(k, 0))


def test_window_of_32_entries():
    k = b"\x07" * 32
    table = PatternTable()
    sid = table.register_session(k, PI, 32)
    assert len(table) == 32
    assert sorted(table.session(sid).live) == list(range(32))
    for t in range(32):
        assert any(c.t == t for c in table.lookup(prefix_of(k, t)))
    s = table.stats()
    assert s.buckets + s.colliding_entries == 32


def test_same_key_twice_shares_buckets():
    k = b"\x01" * 32
    table = PatternTable()
    a = table.register_session(k, PI, 4)
    b = table.register_session(k, PI, 4)
    assert a != b
    assert {c.session_id for c in table.lookup(prefix_of(k, 2))} == {a, b}


def test_lookup_miss_and_hit():
    k = b"\x02" * 32
    table = PatternTable()
    sid = table.register_session(k, PI, 8)
    live = {prefix_of(k, t) for t in range(8)}
    probe = next(p for p in (bytes([i, 0, 0]) for i in range(256)) if p not in live)
    assert table.lookup(probe) == []
    [c] = [c for c in table.lookup(prefix_of(k, 3)) if c.t == 3]
    assert c.session_id == sid and c.keys == derive_temp_keys(k, 3)


def test_consume_removes_and_slides():
    k = b"\x03" * 32
    table = PatternTable()
    sid = table.register_session(k, PI, 32)
    table.consume(sid, 3)
    assert all(c.t != 3 for c in table.lookup(prefix_of(k, 3)))
    assert table.recently_consumed(prefix_of(k, 3))
    table.consume(sid, 0)
    assert 32 in table.session(sid).live and 33 in table.session(sid).live
    assert len(table) == 32
    with pytest.raises(ReplayError):
        table.consume(sid, 0)


def test_out_of_order_within_window_consumed_once():
    k = b"\x04" * 32
    table = PatternTable()
    sid = table.register_session(k, PI, 32)
    rng = random.Random(1)
    order = []
    for base in range(0, 1000, 32):
        block = list(range(base, min(base + 32, 1000)))
        rng.shuffle(block)
        order += block
    for t in order:
        table.consume(sid, t)
    assert table.stats().consumed == 1000
    for t in rng.sample(range(1000), 50):
        with pytest.raises(ReplayError):
            table.consume(sid, t)


def test_stale_entries_expire_after_losses():
    k = b"\x05" * 32
    table = PatternTable()
    sid = table.register_session(k, PI, 4)
    table.consume(sid, 3)        # 0, 1, 2 lost so far
    assert sorted(table.session(sid).live) == [0, 1, 2, 4]
    table.consume(sid, 4)        # 0 is now W behind the newest
    assert sorted(table.session(sid).live) == [1, 2, 5, 6]
    table.consume(sid, 6)        # 1 and 2 follow
    assert sorted(table.session(sid).live) == [5, 7, 8, 9]
    assert table.stats().expired == 3


def test_window_bounds_and_capacity():
    table = PatternTable(capacity=40)
    with pytest.raises(ValueError):
        table.register_session(bytes(32), PI, 0)
    with pytest.raises(ValueError):
        table.register_session(bytes(32), PI, 1025)
    table.register_session(bytes(32), PI, 32)
    with pytest.raises(TableFullError):
        table.register_session(b"\x01" * 32, PI, 9)


def test_memory_bound_counts():
    table = PatternTable()
    rng = random.Random(2)
    for _ in range(50):
        table.register_session(rng.randbytes(32), PI, 16)
    assert len(table) == 50 * 16
    assert table.stats().sessions == 50
    sid = table.sessions()[0]
    table.unregister_session(sid)
    assert len(table) == 49 * 16


def test_random_prefix_match_rate():
    rng = random.Random(3)
    table = PatternTable()
    for _ in range(1000):
        table.register_session(rng.randbytes(32), PI, 32)
    entries = len(table)
    buckets = table.stats().buckets
    probe = random.Random(30)
    n = 300_000
    hits = sum(bool(table.lookup(probe.randbytes(3))) for _ in range(n))
    # a uniform prefix hits one of the occupied buckets
    assert stats.binomtest(hits, n, buckets / 2**24).pvalue > 0.001
    assert abs(buckets - entries) < entries * 0.01


def test_accidental_prefix_match_rejected_by_mac():
    rng = random.Random(4)
    victim = Hop(rng.randbytes(16), rng.randbytes(32))
    table = PatternTable()
    table.register_session(victim.master_key, PI, 32)
    node = NodeContext(victim.address, table)
    other = Hop(victim.address, rng.randbytes(32))
    for t in range(32):
        _, header, body = create_packet([other], t, PI, b"forged", rng)
        # graft a live prefix of the victim onto the forged slot
        off = header.pointer * ELEMENT_SIZE
        vec = body.routing_vector[:off] + prefix_of(victim.master_key, t) + body.routing_vector[off + 3:]
        out = process_packet(node, header, body._replace(routing_vector=vec))
        assert out == Drop(DropReason.BAD_MAC)
    assert len(table) == 32


def test_completeness_through_processing():
    rng = random.Random(5)
    hops = [Hop(rng.randbytes(16), rng.randbytes(32)) for _ in range(2)]
    table = PatternTable()
    for _ in range(20):  # noise sessions sharing the table
        table.register_session(rng.randbytes(32), PI, 32)
    table.register_session(hops[0].master_key, PI, 32)
    node = NodeContext(hops[0].address, table)
    for t in rng.sample(range(32), 32):
        _, header, body = create_packet(hops, t, PI, b"x", rng)
        out = process_packet(node, header, body)
        assert isinstance(out, Forward) and out.t == t


def test_concurrent_consume_exactly_once():
    k = b"\x06" * 32
    table = PatternTable()
    sid = table.register_session(k, PI, 64)
    wins = []
    barrier = threading.Barrier(8)

    def worker():
        barrier.wait()
        for t in range(64):
            try:
                table.consume(sid, t)
                wins.append(t)
            except ReplayError:
                pass

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert sorted(wins) == list(range(64))
