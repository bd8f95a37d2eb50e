"""1500-byte IPv6 frames carrying the Ariadne routing extension header.

Layout::

    IPv6 fixed header (40) | common header (8) | [alpha (32)] | vector | payload

The IPv6 next-header field is 253 (experimental). Inside the extension the
routing-type byte tells data (1) from setup (2) packets. The destination
address of the IPv6 header carries the next hop.

Decoding accepts only frames that :func:`encode` can produce: version 6,
zero traffic class and flow label, payload length 1460, hop limit 64, and an
extension header whose length fields match its routing type. That makes the
pair a bijection between packets and the frames decode accepts.
"""
from __future__ import annotations

import enum
import struct
from typing import NamedTuple, Union

from .data_protocol import AriadnePacketBody, CommonHeader, hdr_ext_len_for
from .deployment import (
    ADDRESS_SIZE,
    COMMON_HEADER_SIZE,
    DEFAULT_DEPLOYMENT,
    FRAME_SIZE,
    GROUP_ELEMENT_SIZE,
    IPV6_HEADER_SIZE,
    NEXT_HEADER_ARIADNE,
    NO_NEXT_HEADER,
    ROUTING_TYPE_DATA,
    ROUTING_TYPE_SETUP,
    Deployment,
)
from .errors import MalformedPacketError
from .setup_protocol import SetupPacketBody

HOP_LIMIT = 64
_VERSION_WORD = 6 << 28
_IPV6 = struct.Struct("!IHBB16s16s")


class PacketKind(enum.IntEnum):
    DATA = ROUTING_TYPE_DATA
    SETUP = ROUTING_TYPE_SETUP


class WirePacket(NamedTuple):
    kind: PacketKind
    src_addr: bytes
    dst_addr: bytes
    header: CommonHeader
    body: Union[AriadnePacketBody, SetupPacketBody]


def extension_size(kind: PacketKind, deployment: Deployment = DEFAULT_DEPLOYMENT) -> int:
    if kind is PacketKind.DATA:
        return deployment.data_extension_size
    return deployment.setup_extension_size


def encode(kind: PacketKind, src_addr: bytes, dst_addr: bytes, header: CommonHeader, body,
           deployment: Deployment = DEFAULT_DEPLOYMENT) -> bytes:
    kind = PacketKind(kind)
    if len(src_addr) != ADDRESS_SIZE or len(dst_addr) != ADDRESS_SIZE:
        raise ValueError("addresses must be 16 bytes")
    if len(header.reserved) != 3:
        raise ValueError("reserved field must be 3 bytes")
    if not 0 <= header.pointer < deployment.l_pmax:
        raise ValueError(f"pointer {header.pointer} outside [0, {deployment.l_pmax})")
    ext = extension_size(kind, deployment)
    common = header._replace(
        routing_type=int(kind), hdr_ext_len=hdr_ext_len_for(ext),
        next_header=NO_NEXT_HEADER, segments_left=0,
    ).to_bytes()

    if kind is PacketKind.SETUP:
        if len(body.alpha) != GROUP_ELEMENT_SIZE:
            raise ValueError("alpha must be 32 bytes")
        parts = [common, body.alpha, body.routing_vector, body.payload]
        payload_size = deployment.setup_payload_size
    else:
        parts = [common, body.routing_vector, body.payload]
        payload_size = deployment.data_payload_size
    if len(body.routing_vector) != deployment.vector_size:
        raise ValueError(f"routing vector must be {deployment.vector_size} bytes")
    if len(body.payload) != payload_size:
        raise ValueError(f"payload must be {payload_size} bytes for a {kind.name.lower()} packet")

    ip = _IPV6.pack(_VERSION_WORD, FRAME_SIZE - IPV6_HEADER_SIZE, NEXT_HEADER_ARIADNE,
                    HOP_LIMIT, src_addr, dst_addr)
    frame = b"".join([ip, *parts])
    assert len(frame) == FRAME_SIZE
    return frame


def decode(frame: bytes, deployment: Deployment = DEFAULT_DEPLOYMENT) -> WirePacket:
    if len(frame) != FRAME_SIZE:
        raise MalformedPacketError(f"frame is {len(frame)} bytes, expected {FRAME_SIZE}")
    word, plen, nh, hops, src, dst = _IPV6.unpack_from(frame)
    if word != _VERSION_WORD:
        raise MalformedPacketError("not a plain IPv6 header")
    if plen != FRAME_SIZE - IPV6_HEADER_SIZE:
        raise MalformedPacketError(f"IPv6 payload length {plen}")
    if nh != NEXT_HEADER_ARIADNE:
        raise MalformedPacketError(f"next header {nh} is not {NEXT_HEADER_ARIADNE}")
    if hops != HOP_LIMIT:
        raise MalformedPacketError(f"hop limit {hops}")

    off = IPV6_HEADER_SIZE
    header = CommonHeader.from_bytes(frame[off:off + COMMON_HEADER_SIZE])
    try:
        kind = PacketKind(header.routing_type)
    except ValueError:
        raise MalformedPacketError(f"unknown routing type {header.routing_type}") from None
    if header.hdr_ext_len != hdr_ext_len_for(extension_size(kind, deployment)):
        raise MalformedPacketError("extension length does not match routing type")
    if header.next_header != NO_NEXT_HEADER or header.segments_left != 0:
        raise MalformedPacketError("unexpected routing header fields")
    if header.pointer >= deployment.l_pmax:
        raise MalformedPacketError(f"pointer {header.pointer} outside [0, {deployment.l_pmax})")

    off += COMMON_HEADER_SIZE
    vsize = deployment.vector_size
    if kind is PacketKind.SETUP:
        alpha = frame[off:off + GROUP_ELEMENT_SIZE]
        off += GROUP_ELEMENT_SIZE
        body = SetupPacketBody(alpha, frame[off:off + vsize], frame[off + vsize:])
    else:
        body = AriadnePacketBody(frame[off:off + vsize], frame[off + vsize:])
    return WirePacket(kind, src, dst, header, body)


def kind_of(body) -> PacketKind:
    return PacketKind.SETUP if isinstance(body, SetupPacketBody) else PacketKind.DATA
