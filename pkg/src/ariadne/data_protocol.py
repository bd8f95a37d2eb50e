"""Ariadne data packets: source-side creation and per-hop processing.

The packet content ``X`` is the routing vector followed by the padded
payload. For hop ``i`` and counter ``t`` one keystream of
``36 + len(X)`` bytes is drawn from ``k_enc(i, t)``:

* bytes ``[0, 36)`` encrypt the hop's routing element (its first 3 bytes
  encrypt the pattern),
* bytes ``[36, 36 + len(X))`` are XORed over ``X`` starting at byte 0, so
  their first ``len(vector)`` bytes are also the header stream used by the
  filler.

The MAC of each layer covers ``X`` only; the 8-byte common header is
rewritten at every hop and stays outside it.
"""
from __future__ import annotations

import hmac
import random
import struct
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Union

import numpy as np

from .crypto import (
    KEY_SIZE,
    TempKeyPair,
    default_rng,
    derive_temp_keys,
    keystream,
    mac,
    random_bytes,
    xor_bytes,
)
from .deployment import (
    ADDRESS_SIZE,
    COMMON_HEADER_SIZE,
    DEFAULT_DEPLOYMENT,
    ELEMENT_SIZE,
    NO_NEXT_HEADER,
    PATTERN_SIZE,
    ROUTING_TYPE_DATA,
    Deployment,
)
from .errors import MalformedPacketError, PathTooLongError, PayloadTooLongError, ReplayError
from .key_reference import PatternTable
from .routing_vector import (
    ELEMENT_HEAD_SIZE,
    ZERO_MAC,
    element_heads,
    fill_vector,
    sample_slot_assignment,
    splice_slot,
)

LENGTH_PREFIX_SIZE = 2
_HEADER = struct.Struct("!BBBBB3s")


class CommonHeader(NamedTuple):
    """Framing bytes, the slot pointer and 3 reserved random bytes."""

    pointer: int
    reserved: bytes = b"\x00\x00\x00"
    routing_type: int = ROUTING_TYPE_DATA
    hdr_ext_len: int = 0
    next_header: int = NO_NEXT_HEADER
    segments_left: int = 0

    def to_bytes(self) -> bytes:
        return _HEADER.pack(
            self.next_header, self.hdr_ext_len, self.routing_type,
            self.segments_left, self.pointer, self.reserved,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "CommonHeader":
        if len(data) != COMMON_HEADER_SIZE:
            raise MalformedPacketError("common header must be 8 bytes")
        nh, hel, rt, sl, ptr, res = _HEADER.unpack(data)
        return cls(ptr, res, rt, hel, nh, sl)


def hdr_ext_len_for(extension_size: int) -> int:
    """Extension length in 4-byte units past the first 8 bytes."""
    return (extension_size - COMMON_HEADER_SIZE) // 4


class AriadnePacketBody(NamedTuple):
    routing_vector: bytes
    payload: bytes

    def content(self) -> bytes:
        return self.routing_vector + self.payload


@dataclass(frozen=True, slots=True)
class Hop:
    address: bytes
    master_key: bytes

    def __post_init__(self):
        if len(self.address) != ADDRESS_SIZE:
            raise ValueError("address must be 16 bytes")
        if len(self.master_key) != KEY_SIZE:
            raise ValueError("master key must be 32 bytes")


PathSpec = Sequence[Hop]


class DropReason(str, Enum):
    BAD_PATTERN = "bad-pattern"
    BAD_MAC = "bad-mac"
    REPLAY = "replay"
    MALFORMED = "malformed"


@dataclass(slots=True)
class Forward:
    next_addr: bytes
    header: CommonHeader
    body: object
    # local diagnostics, never serialized
    session_id: int | None = None
    t: int | None = None


@dataclass(slots=True)
class Deliver:
    payload: bytes
    session_id: int | None = None
    t: int | None = None


@dataclass(slots=True)
class Drop:
    reason: DropReason


ProcessOutcome = Union[Forward, Deliver, Drop]


@dataclass
class NodeContext:
    address: bytes
    table: PatternTable = field(default_factory=PatternTable)
    deployment: Deployment = DEFAULT_DEPLOYMENT
    rng: random.Random | None = None


# ---------------------------------------------------------------------------
# payload framing

def pad_payload(data: bytes, length: int = DEFAULT_DEPLOYMENT.data_payload_size,
                rng: random.Random | None = None) -> bytes:
    """``len(data)`` as 2 big-endian bytes, the data, then random fill."""
    room = length - LENGTH_PREFIX_SIZE
    if len(data) > room:
        raise PayloadTooLongError(f"payload of {len(data)} bytes exceeds {room}")
    return len(data).to_bytes(2, "big") + data + random_bytes(rng, room - len(data))


def unpad_payload(padded: bytes) -> bytes:
    if len(padded) < LENGTH_PREFIX_SIZE:
        raise MalformedPacketError("padded payload shorter than its length prefix")
    n = int.from_bytes(padded[:2], "big")
    if n > len(padded) - LENGTH_PREFIX_SIZE:
        raise MalformedPacketError(f"declared length {n} exceeds padded payload")
    return padded[2:2 + n]


# ---------------------------------------------------------------------------
# layer wrapping and peeling, shared with the setup protocol

def wrap_layers(content: bytes, assignment: Sequence[int], heads: Sequence[bytes],
                streams: Sequence[bytes], mac_keys: Sequence[bytes], l_pmax: int) -> bytes:
    """Backward pass from the destination to hop 1."""
    x = content
    for i in reversed(range(len(assignment))):
        s = streams[i]
        x = xor_bytes(x, s[ELEMENT_SIZE:])
        gamma = mac(mac_keys[i], x)
        x = splice_slot(x, assignment[i], xor_bytes(heads[i] + gamma, s[:ELEMENT_SIZE]), l_pmax)
    return x


def peel_layer(content: bytes, slot: int, enc_key: bytes, mac_key: bytes):
    """Verify and remove one layer.

    Returns ``(head, new_content)`` where ``head`` is the decrypted element
    without its MAC, or ``None`` when the MAC does not verify.
    """
    n = len(content)
    stream = keystream(enc_key, ELEMENT_SIZE + n)
    off = slot * ELEMENT_SIZE
    end = off + ELEMENT_SIZE
    element = (int.from_bytes(content[off:end], "little")
               ^ int.from_bytes(stream[:ELEMENT_SIZE], "little")).to_bytes(ELEMENT_SIZE, "little")
    head = element[:ELEMENT_HEAD_SIZE]
    starred = content[:off] + head + ZERO_MAC + content[end:]
    if not hmac.compare_digest(mac(mac_key, starred), element[ELEMENT_HEAD_SIZE:]):
        return None
    out = np.frombuffer(starred, np.uint8) ^ np.frombuffer(stream, np.uint8, n, ELEMENT_SIZE)
    return head, out.tobytes()


# ---------------------------------------------------------------------------
# creation

def _check_path(n: int, deployment: Deployment) -> None:
    if n < 1:
        raise ValueError("path must contain at least the destination")
    if n > deployment.l_pmax:
        raise PathTooLongError(f"path of {n} hops exceeds l_pmax={deployment.l_pmax}")


def create_packet(path: PathSpec, t: int, pattern: bytes, payload: bytes,
                  rng: random.Random | None = None,
                  deployment: Deployment = DEFAULT_DEPLOYMENT):
    """Build the packet for counter ``t`` along ``path`` (hops 1..n+1).

    Returns ``(first_hop_address, header, body)``.
    """
    n = len(path)
    _check_path(n, deployment)
    if len(pattern) != PATTERN_SIZE:
        raise ValueError("pattern must be 3 bytes")
    rng = default_rng(rng)
    padded = pad_payload(payload, deployment.data_payload_size, rng)
    vsize = deployment.vector_size
    content_size = vsize + len(padded)

    keys = [derive_temp_keys(hop.master_key, t) for hop in path]
    streams = [keystream(k.enc, ELEMENT_SIZE + content_size) for k in keys]
    assignment = sample_slot_assignment(n, deployment.l_pmax, rng)
    heads = element_heads(pattern, [hop.address for hop in path], assignment)
    vector = fill_vector(
        random_bytes(rng, vsize), assignment, heads,
        [s[ELEMENT_SIZE:ELEMENT_SIZE + vsize] for s in streams],
    )
    x = wrap_layers(vector + padded, assignment, heads, streams, [k.mac for k in keys], deployment.l_pmax)
    header = CommonHeader(
        pointer=assignment[0],
        reserved=random_bytes(rng, 3),
        routing_type=ROUTING_TYPE_DATA,
        hdr_ext_len=hdr_ext_len_for(deployment.data_extension_size),
    )
    return path[0].address, header, AriadnePacketBody(x[:vsize], x[vsize:])


# ---------------------------------------------------------------------------
# processing

def process_packet(node: NodeContext, header: CommonHeader, body: AriadnePacketBody) -> ProcessOutcome:
    dep = node.deployment
    p = header.pointer
    vector = body.routing_vector
    if p >= dep.l_pmax or len(vector) != dep.vector_size:
        return Drop(DropReason.MALFORMED)
    off = p * ELEMENT_SIZE
    prefix = vector[off:off + PATTERN_SIZE]
    table = node.table
    candidates = table.lookup(prefix)
    if not candidates:
        reason = DropReason.REPLAY if table.recently_consumed(prefix) else DropReason.BAD_PATTERN
        return Drop(reason)

    content = vector + body.payload
    for cand in candidates:
        peeled = peel_layer(content, p, cand.keys.enc, cand.keys.mac)
        if peeled is not None:
            break
    else:
        return Drop(DropReason.BAD_MAC)
    try:
        table.consume(cand.session_id, cand.t)
    except ReplayError:
        return Drop(DropReason.REPLAY)

    head, content = peeled
    next_addr = head[PATTERN_SIZE:PATTERN_SIZE + ADDRESS_SIZE]
    vsize = dep.vector_size
    if next_addr == node.address:
        try:
            data = unpad_payload(content[vsize:])
        except MalformedPacketError:
            return Drop(DropReason.MALFORMED)
        return Deliver(data, cand.session_id, cand.t)
    next_slot = head[PATTERN_SIZE + ADDRESS_SIZE]
    if next_slot >= dep.l_pmax:
        return Drop(DropReason.MALFORMED)
    new_header = CommonHeader(
        pointer=next_slot,
        reserved=random_bytes(node.rng, 3),
        routing_type=header.routing_type,
        hdr_ext_len=header.hdr_ext_len,
        next_header=header.next_header,
        segments_left=header.segments_left,
    )
    return Forward(next_addr, new_header, AriadnePacketBody(content[:vsize], content[vsize:]),
                   cand.session_id, cand.t)


def temp_keys_for_path(path: PathSpec, t: int) -> list[TempKeyPair]:
    return [derive_temp_keys(hop.master_key, t) for hop in path]
