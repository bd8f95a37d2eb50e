import itertools
import random
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from ariadne.crypto import keystream
from ariadne.deployment import DEFAULT_PATTERN, ELEMENT_SIZE
from ariadne.errors import PathTooLongError
from ariadne.routing_vector import (
    ZERO_MAC,
    RoutingElement,
    build_filler,
    element_heads,
    read_slot,
    sample_slot_assignment,
    splice_slot,
)


def test_element_layout():
    e = RoutingElement(b"abc", bytes(range(16)), 4, b"\xff" * 16)
    raw = e.to_bytes()
    assert len(raw) == 36
    assert raw == b"abc" + bytes(range(16)) + b"\x04" + b"\xff" * 16
    assert RoutingElement.from_bytes(raw) == e
    assert e.starred().mac == ZERO_MAC
    with pytest.raises(ValueError):
        RoutingElement(b"ab", bytes(16), 0)
    with pytest.raises(ValueError):
        RoutingElement(b"abc", bytes(16), 256)


def test_full_occupancy_is_permutation():
    rng = random.Random(0)
    for _ in range(50):
        assert sorted(sample_slot_assignment(5, 5, rng)) == [0, 1, 2, 3, 4]


def test_single_hop_assignment():
    rng = random.Random(1)
    seen = {sample_slot_assignment(1, 5, rng)[0] for _ in range(200)}
    assert seen == {0, 1, 2, 3, 4}


def test_assignment_errors():
    with pytest.raises(PathTooLongError):
        sample_slot_assignment(6, 5)
    with pytest.raises(ValueError):
        sample_slot_assignment(0, 5)


def test_ordered_pairs_uniform():
    rng = random.Random(2024)
    n = 10_000
    counts = Counter(tuple(sample_slot_assignment(2, 5, rng)) for _ in range(n))
    pairs = list(itertools.permutations(range(5), 2))
    assert set(counts) == set(pairs)
    observed = [counts[p] for p in pairs]
    p = 1 / len(pairs)
    sigma = (n * p * (1 - p)) ** 0.5
    assert all(abs(c - n * p) <= 3 * sigma for c in observed)
    assert stats.chisquare(observed).pvalue > 0.001


def test_read_splice_roundtrip_and_boundaries():
    rng = random.Random(3)
    vec = rng.randbytes(180)
    for i in range(5):
        b = rng.randbytes(36)
        out = splice_slot(vec, i, b)
        assert read_slot(out, i) == b
        assert out[:i * 36] == vec[:i * 36] and out[(i + 1) * 36:] == vec[(i + 1) * 36:]
    b1, b2 = rng.randbytes(36), rng.randbytes(36)
    assert read_slot(splice_slot(splice_slot(vec, 2, b1), 2, b2), 2) == b2
    assert splice_slot(vec, 4, b1)[:144] == vec[:144]
    for bad in (-1, 5):
        with pytest.raises(IndexError):
            read_slot(vec, bad)
        with pytest.raises(IndexError):
            splice_slot(vec, bad, b1)
    with pytest.raises(ValueError):
        splice_slot(vec, 0, b"short")


def test_splice_with_trailing_payload():
    rng = random.Random(4)
    content = rng.randbytes(180 + 50)
    out = splice_slot(content, 4, bytes(36), l_pmax=5)
    assert out[144:180] == bytes(36) and out[180:] == content[180:]
    with pytest.raises(IndexError):
        splice_slot(content, 5, bytes(36), l_pmax=5)


def _random_path(rng, n):
    addrs = [rng.randbytes(16) for _ in range(n)]
    keys = [rng.randbytes(32) for _ in range(n)]
    return addrs, keys


@pytest.mark.parametrize("n", range(1, 6))
def test_last_write_covered_by_one_xor(n):
    rng = random.Random(n)
    addrs, keys = _random_path(rng, n)
    assignment = sample_slot_assignment(n, 5, rng)
    vec = build_filler(assignment, addrs, keys, DEFAULT_PATTERN, rng)
    assert len(vec) == 180
    last = assignment[-1]
    stream = keystream(keys[-1], ELEMENT_SIZE + 180)[ELEMENT_SIZE:]
    recovered = bytes(a ^ b for a, b in zip(read_slot(vec, last), stream[last * 36:(last + 1) * 36]))
    expected = RoutingElement(DEFAULT_PATTERN, addrs[-1], last).to_bytes()
    assert recovered == expected


def test_filler_matches_independent_construction():
    # rebuild the filler with plain byte loops
    rng = random.Random(9)
    addrs, keys = _random_path(rng, 4)
    assignment = [3, 0, 4, 1]
    initial = rng.randbytes(180)
    vec = bytearray(initial)
    for i in range(4):
        nxt = min(i + 1, 3)
        star = DEFAULT_PATTERN + addrs[nxt] + bytes([assignment[nxt]]) + bytes(16)
        vec[assignment[i] * 36:(assignment[i] + 1) * 36] = star
        ks = keystream(keys[i], 216)[36:]
        vec = bytearray(x ^ y for x, y in zip(vec, ks))
    assert build_filler(assignment, addrs, keys, DEFAULT_PATTERN, initial=initial) == bytes(vec)


def test_filler_deterministic_under_seed():
    addrs, keys = _random_path(random.Random(0), 3)
    a = build_filler([1, 2, 0], addrs, keys, DEFAULT_PATTERN, random.Random(5))
    b = build_filler([1, 2, 0], addrs, keys, DEFAULT_PATTERN, random.Random(5))
    assert a == b


def test_unassigned_slots_look_random():
    rng = random.Random(77)
    matches = total = 0
    for _ in range(1000):
        addrs, keys = _random_path(rng, 2)
        assignment = sample_slot_assignment(2, 5, rng)
        vec = np.frombuffer(build_filler(assignment, addrs, keys, DEFAULT_PATTERN, rng), np.uint8)
        fresh = np.frombuffer(rng.randbytes(180), np.uint8)
        for s in set(range(5)) - set(assignment):
            matches += int(np.count_nonzero(vec[s * 36:(s + 1) * 36] == fresh[s * 36:(s + 1) * 36]))
            total += 36
    assert stats.binomtest(matches, total, 1 / 256).pvalue > 0.001


def test_element_heads_terminal_self_pointer():
    addrs = [bytes([i]) * 16 for i in range(3)]
    heads = element_heads(DEFAULT_PATTERN, addrs, [2, 0, 4])
    assert heads[0] == DEFAULT_PATTERN + addrs[1] + b"\x00"
    assert heads[2] == DEFAULT_PATTERN + addrs[2] + b"\x04"


def test_filler_argument_checks():
    with pytest.raises(ValueError):
        build_filler([0, 1], [bytes(16)], [bytes(32)] * 2, DEFAULT_PATTERN)
    with pytest.raises(ValueError):
        build_filler([0], [bytes(16)], [bytes(32)], DEFAULT_PATTERN, initial=bytes(10))
