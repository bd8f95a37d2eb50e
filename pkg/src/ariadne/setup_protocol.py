"""Path setup: establish master keys with every hop through one onion.

The source picks an ephemeral X25519 pair ``(x_t, y_t)``. Hop ``i`` receives
the group element ``alpha_i``, computes ``k_i = alpha_i ** x_i`` and hands
``alpha_{i+1} = alpha_i ** b_i`` to its successor, where ``b_i`` hashes
``(alpha_i, k_i)``. The source reaches the same ``k_i`` as
``y_i ** (x_t * b_1 * ... * b_{i-1})``.

Routing elements are ``Addr_{i+1} | p_{i+1} | 3 random bytes | MAC``;
the group element, not a pattern, tells the hop which key to use. Layers
are wrapped and peeled exactly as for data packets, with counter 0 keys.
"""
from __future__ import annotations

import logging
import random
import struct
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

from .crypto import (
    BASE_POINT,
    TempKeyPair,
    blind,
    blind_factor,
    default_rng,
    derive_temp_keys,
    dh_keygen,
    dh_shared,
    exp_chain,
    keystream,
    random_bytes,
)
from .data_protocol import (
    CommonHeader,
    Deliver,
    Drop,
    DropReason,
    Forward,
    ProcessOutcome,
    hdr_ext_len_for,
    pad_payload,
    peel_layer,
    unpad_payload,
    wrap_layers,
)
from .deployment import (
    ADDRESS_SIZE,
    DEFAULT_DEPLOYMENT,
    DEFAULT_PATTERN,
    DEFAULT_WINDOW,
    ELEMENT_SIZE,
    GROUP_ELEMENT_SIZE,
    PATTERN_SIZE,
    ROUTING_TYPE_SETUP,
    Deployment,
)
from .errors import InvalidGroupElementError, MalformedPacketError, PathTooLongError
from .key_reference import PatternTable
from .routing_vector import fill_vector, sample_slot_assignment

logger = logging.getLogger(__name__)

SETUP_T = 0
NONCE_SIZE = 16
SETUP_PAD_SIZE = 3
_PARAMS = struct.Struct("!4sB3sH16s32s")
_MAGIC = b"ASU1"


@dataclass(frozen=True)
class SetupHopMaterial:
    alpha: bytes
    master_key: bytes
    blinding: bytes
    keys: TempKeyPair


@dataclass(frozen=True)
class SetupChain:
    secret: bytes  # x_t
    public: bytes  # y_t
    hops: tuple[SetupHopMaterial, ...]

    @property
    def master_keys(self) -> list[bytes]:
        return [h.master_key for h in self.hops]


class SetupPacketBody(NamedTuple):
    alpha: bytes
    routing_vector: bytes
    payload: bytes


@dataclass(frozen=True)
class SetupPayload:
    """Session parameters for the destination, plus application bytes."""

    pattern: bytes
    window: int
    nonce: bytes
    ephemeral: bytes
    data: bytes = b""

    def encode(self) -> bytes:
        return _PARAMS.pack(_MAGIC, 1, self.pattern, self.window, self.nonce, self.ephemeral) + self.data

    @classmethod
    def decode(cls, raw: bytes) -> "SetupPayload":
        if len(raw) < _PARAMS.size:
            raise MalformedPacketError("setup payload too short")
        magic, version, pattern, window, nonce, eph = _PARAMS.unpack_from(raw)
        if magic != _MAGIC or version != 1:
            raise MalformedPacketError("not a setup payload")
        return cls(pattern, window, nonce, eph, raw[_PARAMS.size:])


def setup_keygen(path_pubkeys: Sequence[bytes], rng: random.Random | None = None,
                 l_pmax: int = DEFAULT_DEPLOYMENT.l_pmax) -> SetupChain:
    n = len(path_pubkeys)
    if not 1 <= n <= l_pmax:
        raise PathTooLongError(f"setup path of {n} hops outside [1, {l_pmax}]")
    x_t, y_t = dh_keygen(rng)
    alpha = y_t
    scalars = [x_t]
    hops = []
    for y_i in path_pubkeys:
        k_i = exp_chain(y_i, scalars)
        b_i = blind_factor(alpha, k_i)
        hops.append(SetupHopMaterial(alpha, k_i, b_i, derive_temp_keys(k_i, SETUP_T)))
        alpha = blind(alpha, b_i)
        scalars.append(b_i)
    return SetupChain(x_t, y_t, tuple(hops))


def _setup_heads(addrs: Sequence[bytes], assignment: Sequence[int], rng) -> list[bytes]:
    n = len(addrs)
    heads = []
    for i in range(n):
        nxt = i + 1 if i + 1 < n else i
        heads.append(addrs[nxt] + bytes((assignment[nxt],)) + random_bytes(rng, SETUP_PAD_SIZE))
    return heads


def create_setup_packet(path: Sequence[tuple[bytes, bytes]], payload: bytes = b"",
                        pattern: bytes | None = None, window: int = DEFAULT_WINDOW,
                        rng: random.Random | None = None, chain: SetupChain | None = None,
                        deployment: Deployment = DEFAULT_DEPLOYMENT):
    """Build a setup onion over ``path``, a list of ``(address, public key)``.

    Pass a ``chain`` from :func:`setup_keygen` to keep the per-hop master
    keys on the source side. Returns ``(first_hop_address, header, body)``.
    """
    n = len(path)
    if not 1 <= n <= deployment.l_pmax:
        raise PathTooLongError(f"setup path of {n} hops outside [1, {deployment.l_pmax}]")
    pattern = DEFAULT_PATTERN if pattern is None else pattern
    if len(pattern) != PATTERN_SIZE:
        raise ValueError("pattern must be 3 bytes")
    rng = default_rng(rng)
    if chain is None:
        chain = setup_keygen([pk for _, pk in path], rng, deployment.l_pmax)
    elif len(chain.hops) != n:
        raise ValueError("key chain length differs from path length")

    params = SetupPayload(pattern, window, random_bytes(rng, NONCE_SIZE), chain.public, payload)
    padded = pad_payload(params.encode(), deployment.setup_payload_size, rng)
    vsize = deployment.vector_size
    content_size = vsize + len(padded)
    streams = [keystream(h.keys.enc, ELEMENT_SIZE + content_size) for h in chain.hops]
    assignment = sample_slot_assignment(n, deployment.l_pmax, rng)
    heads = _setup_heads([addr for addr, _ in path], assignment, rng)
    vector = fill_vector(
        random_bytes(rng, vsize), assignment, heads,
        [s[ELEMENT_SIZE:ELEMENT_SIZE + vsize] for s in streams],
    )
    x = wrap_layers(vector + padded, assignment, heads, streams,
                    [h.keys.mac for h in chain.hops], deployment.l_pmax)
    header = CommonHeader(
        pointer=assignment[0],
        reserved=random_bytes(rng, 3),
        routing_type=ROUTING_TYPE_SETUP,
        hdr_ext_len=hdr_ext_len_for(deployment.setup_extension_size),
    )
    return path[0][0], header, SetupPacketBody(chain.hops[0].alpha, x[:vsize], x[vsize:])


# ---------------------------------------------------------------------------
# relay side

@dataclass(frozen=True)
class InstalledKey:
    session_id: int
    master_key: bytes
    alpha: bytes
    duplicate: bool


@dataclass
class SetupNode:
    """A relay's static key pair plus the table that setup installs into."""

    address: bytes
    secret: bytes
    public: bytes
    table: PatternTable = field(default_factory=PatternTable)
    pattern: bytes = b""
    window: int = DEFAULT_WINDOW
    deployment: Deployment = DEFAULT_DEPLOYMENT
    rng: random.Random | None = None
    installed: list[InstalledKey] = field(default_factory=list)
    _seen_alphas: set = field(default_factory=set, repr=False)

    def __post_init__(self):
        if not self.pattern:
            self.pattern = DEFAULT_PATTERN

    @classmethod
    def generate(cls, address: bytes, rng: random.Random | None = None, **kw) -> "SetupNode":
        x, y = dh_keygen(rng)
        return cls(address, x, y, rng=rng, **kw)

    @property
    def duplicate_installs(self) -> int:
        return sum(k.duplicate for k in self.installed)

    def key_store(self) -> list[bytes]:
        return [k.master_key for k in self.installed]


def process_setup_packet(node: SetupNode, header: CommonHeader, body: SetupPacketBody) -> ProcessOutcome:
    """Peel one setup layer and install the resulting master key.

    Setup packets carry no replay guard: a replayed packet installs a second
    session for the same key, which is recorded as a duplicate.
    """
    dep = node.deployment
    p = header.pointer
    if p >= dep.l_pmax or len(body.routing_vector) != dep.vector_size:
        return Drop(DropReason.MALFORMED)
    try:
        k = dh_shared(body.alpha, node.secret)
    except InvalidGroupElementError:
        return Drop(DropReason.MALFORMED)
    keys = derive_temp_keys(k, SETUP_T)
    peeled = peel_layer(body.routing_vector + body.payload, p, keys.enc, keys.mac)
    if peeled is None:
        return Drop(DropReason.BAD_MAC)
    head, content = peeled

    duplicate = body.alpha in node._seen_alphas
    if duplicate:
        logger.warning("setup packet replayed at %s; installing duplicate session", node.address.hex())
    node._seen_alphas.add(body.alpha)
    sid = node.table.register_session(k, node.pattern, node.window)
    node.installed.append(InstalledKey(sid, k, body.alpha, duplicate))

    vsize = dep.vector_size
    next_addr = head[:ADDRESS_SIZE]
    if next_addr == node.address:
        try:
            data = unpad_payload(content[vsize:])
        except MalformedPacketError:
            return Drop(DropReason.MALFORMED)
        return Deliver(data, sid, SETUP_T)
    next_slot = head[ADDRESS_SIZE]
    if next_slot >= dep.l_pmax:
        return Drop(DropReason.MALFORMED)
    new_alpha = blind(body.alpha, blind_factor(body.alpha, k))
    new_header = header._replace(pointer=next_slot, reserved=random_bytes(node.rng, 3))
    return Forward(next_addr, new_header,
                   SetupPacketBody(new_alpha, content[:vsize], content[vsize:]), sid, SETUP_T)


def source_alpha_chain(chain: SetupChain) -> list[bytes]:
    """``alpha_i`` recomputed as ``g ** (x_t * b_1 * ... * b_{i-1})``."""
    out = []
    scalars = [chain.secret]
    for hop in chain.hops:
        out.append(exp_chain(BASE_POINT, scalars))
        scalars.append(hop.blinding)
    return out


__all__ = [
    "GROUP_ELEMENT_SIZE",
    "InstalledKey",
    "SetupChain",
    "SetupHopMaterial",
    "SetupNode",
    "SetupPacketBody",
    "SetupPayload",
    "create_setup_packet",
    "process_setup_packet",
    "setup_keygen",
    "source_alpha_chain",
]
