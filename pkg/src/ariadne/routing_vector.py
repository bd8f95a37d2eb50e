"""The fixed-size, permuted routing-information vector.

A vector holds ``l_pmax`` slots of 36 bytes. Each hop of a packet owns one
slot, chosen by a fresh random injection from hop index to slot index;
slots no hop owns keep their initial random bytes.
"""
from __future__ import annotations

import random
from collections.abc import Sequence
from dataclasses import dataclass

from .crypto import default_rng, keystream, random_bytes, xor_bytes
from .deployment import (
    ADDRESS_SIZE,
    DEFAULT_DEPLOYMENT,
    ELEMENT_SIZE,
    MAC_SIZE,
    PATTERN_SIZE,
    Deployment,
)
from .errors import PathTooLongError

ELEMENT_HEAD_SIZE = ELEMENT_SIZE - MAC_SIZE
ZERO_MAC = bytes(MAC_SIZE)


@dataclass(frozen=True, slots=True)
class RoutingElement:
    """``pattern | next_addr | next_slot | mac``."""

    pattern: bytes
    next_addr: bytes
    next_slot: int
    mac: bytes = ZERO_MAC

    def __post_init__(self):
        if len(self.pattern) != PATTERN_SIZE:
            raise ValueError("pattern must be 3 bytes")
        if len(self.next_addr) != ADDRESS_SIZE:
            raise ValueError("address must be 16 bytes")
        if not 0 <= self.next_slot <= 255:
            raise ValueError("slot pointer must fit in one byte")
        if len(self.mac) != MAC_SIZE:
            raise ValueError("MAC must be 16 bytes")

    def head(self) -> bytes:
        return self.pattern + self.next_addr + bytes((self.next_slot,))

    def to_bytes(self) -> bytes:
        return self.head() + self.mac

    def starred(self) -> "RoutingElement":
        """Copy with the MAC field zeroed."""
        return RoutingElement(self.pattern, self.next_addr, self.next_slot)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RoutingElement":
        if len(data) != ELEMENT_SIZE:
            raise ValueError(f"routing element must be {ELEMENT_SIZE} bytes")
        return cls(data[:3], data[3:19], data[19], data[20:])


def sample_slot_assignment(
    n_plus_1: int, l_pmax: int = DEFAULT_DEPLOYMENT.l_pmax, rng: random.Random | None = None
) -> list[int]:
    if n_plus_1 < 1:
        raise ValueError("a path has at least one hop")
    if n_plus_1 > l_pmax:
        raise PathTooLongError(f"path of {n_plus_1} hops exceeds l_pmax={l_pmax}")
    return default_rng(rng).sample(range(l_pmax), n_plus_1)


def read_slot(vector: bytes, index: int, l_pmax: int | None = None) -> bytes:
    slots = len(vector) // ELEMENT_SIZE if l_pmax is None else l_pmax
    if not 0 <= index < slots:
        raise IndexError(f"slot {index} out of range [0, {slots})")
    off = index * ELEMENT_SIZE
    return vector[off:off + ELEMENT_SIZE]


def splice_slot(vector: bytes, index: int, data: bytes, l_pmax: int | None = None) -> bytes:
    """Replace slot ``index``; ``vector`` may extend past the slots (payload)."""
    slots = len(vector) // ELEMENT_SIZE if l_pmax is None else l_pmax
    if not 0 <= index < slots:
        raise IndexError(f"slot {index} out of range [0, {slots})")
    if len(data) != ELEMENT_SIZE:
        raise ValueError(f"slot data must be {ELEMENT_SIZE} bytes")
    off = index * ELEMENT_SIZE
    return vector[:off] + data + vector[off + ELEMENT_SIZE:]


def fill_vector(
    initial: bytes, assignment: Sequence[int], heads: Sequence[bytes], header_streams: Sequence[bytes]
) -> bytes:
    """Filler construction shared by data and setup packets.

    For each hop in path order: write ``head | 0_16`` at the hop's slot,
    then XOR the whole vector with that hop's header stream.
    """
    vector = initial
    for slot, head, stream in zip(assignment, heads, header_streams, strict=True):
        vector = xor_bytes(splice_slot(vector, slot, head + ZERO_MAC), stream)
    return vector


def element_heads(pattern: bytes, hop_addrs: Sequence[bytes], assignment: Sequence[int]) -> list[bytes]:
    """Pre-MAC element bytes ``pattern | Addr_{i+1} | p_{i+1}`` for every hop.

    The destination's element points to its own address and its own slot.
    """
    n = len(hop_addrs)
    heads = []
    for i in range(n):
        nxt = i + 1 if i + 1 < n else i
        heads.append(RoutingElement(pattern, hop_addrs[nxt], assignment[nxt]).head())
    return heads


def build_filler(
    assignment: Sequence[int],
    hop_addrs: Sequence[bytes],
    hop_enc_keys: Sequence[bytes],
    pattern: bytes,
    rng: random.Random | None = None,
    deployment: Deployment = DEFAULT_DEPLOYMENT,
    initial: bytes | None = None,
) -> bytes:
    """Filler vector for a data packet.

    ``hop_addrs`` lists the addresses of hops 1..n+1; the last one is the
    destination. ``initial`` overrides the random starting vector.
    """
    n = len(assignment)
    if len(hop_addrs) != n or len(hop_enc_keys) != n:
        raise ValueError("assignment, addresses and keys must have the same length")
    if n > deployment.l_pmax:
        raise PathTooLongError(f"path of {n} hops exceeds l_pmax={deployment.l_pmax}")
    size = deployment.vector_size
    if initial is None:
        initial = random_bytes(rng, size)
    elif len(initial) != size:
        raise ValueError(f"initial vector must be {size} bytes")
    streams = [keystream(k, ELEMENT_SIZE + size)[ELEMENT_SIZE:] for k in hop_enc_keys]
    return fill_vector(initial, assignment, element_heads(pattern, hop_addrs, assignment), streams)
