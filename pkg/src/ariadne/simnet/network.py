"""In-process network of Ariadne relays with link taps and corruptible nodes.

Everything on a link is a real 1500-byte frame from :mod:`ariadne.wire`;
taps record those exact bytes. Delivery is synchronous: a frame handed to
:meth:`SimNetwork.transmit` is processed by the receiving node before the
call returns.

Keys are pairwise. Each (source, relay) pair shares one master key and
the relay keeps one table session for it. Two paths from the same source
through a relay therefore use the same key at that relay. This is the
setting where a corrupted relay can tell sources apart but not paths.
"""
from __future__ import annotations

import hashlib
import ipaddress
import json
import random
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

from .. import wire
from ..crypto import KEY_SIZE, random_bytes
from ..data_protocol import (
    Deliver,
    Drop,
    DropReason,
    Forward,
    Hop,
    NodeContext,
    create_packet,
    process_packet,
)
from ..deployment import DEFAULT_DEPLOYMENT, DEFAULT_PATTERN, DEFAULT_WINDOW, Deployment
from ..errors import AriadneError, MalformedPacketError, PathTooLongError, UnknownNodeError
from ..key_reference import PatternTable
from ..setup_protocol import SetupNode, create_setup_packet, process_setup_packet, setup_keygen


def address_for(name: str) -> bytes:
    """Stable unique-local IPv6 address (fd00::/8) derived from a node name."""
    return b"\xfd" + hashlib.sha256(name.encode()).digest()[:15]


def format_address(addr: bytes) -> str:
    return str(ipaddress.IPv6Address(addr))


class TapRecord(NamedTuple):
    seq: int
    src: bytes
    dst: bytes
    frame: bytes


@dataclass(frozen=True)
class TraceRecord:
    """What a node learned while processing one frame."""

    seq: int
    kind: str            # "data" or "setup"
    prev_addr: bytes
    pointer: int
    outcome: str         # "forward", "deliver" or "drop"
    reason: str | None = None
    next_addr: bytes | None = None
    session_id: int | None = None
    t: int | None = None


@dataclass
class SimNode:
    name: str
    relay: SetupNode
    ctx: NodeContext
    traces: list[TraceRecord] = field(default_factory=list)

    @property
    def address(self) -> bytes:
        return self.relay.address

    @property
    def table(self) -> PatternTable:
        return self.ctx.table


@dataclass
class PairKey:
    master_key: bytes
    session_id: int


@dataclass
class Session:
    """Source-side state for one path."""

    source: bytes
    hops: list[bytes]
    master_keys: list[bytes]
    pattern: bytes = DEFAULT_PATTERN
    next_t: int = 0

    def path_spec(self) -> list[Hop]:
        return [Hop(a, k) for a, k in zip(self.hops, self.master_keys)]


@dataclass(frozen=True)
class HopResult:
    address: bytes
    outcome: str
    reason: str | None = None
    next_addr: bytes | None = None


@dataclass
class PacketReport:
    index: int
    t: int
    hops: list[HopResult]
    delivered: bytes | None = None
    lost: bool = False

    @property
    def dropped(self) -> HopResult | None:
        last = self.hops[-1] if self.hops else None
        return last if last is not None and last.outcome == "drop" else None


@dataclass
class DeliveryReport:
    session: Session
    packets: list[PacketReport]

    @property
    def delivered(self) -> list[bytes | None]:
        return [p.delivered for p in self.packets]

    @property
    def drops(self) -> list[PacketReport]:
        return [p for p in self.packets if p.dropped is not None]

    @property
    def ok(self) -> bool:
        return all(p.delivered is not None for p in self.packets if not p.lost)


class SimNetwork:
    """A set of named nodes, optional link restrictions and link taps.

    ``seed`` makes every random draw (keys, slot choices, padding, reserved
    header bytes) reproducible. ``seed=None`` uses OS randomness.
    """

    def __init__(self, seed: int | None = None, *, deployment: Deployment = DEFAULT_DEPLOYMENT,
                 pattern: bytes = DEFAULT_PATTERN, window: int = DEFAULT_WINDOW,
                 links: Iterable[tuple[str, str]] | None = None):
        self.seed = seed
        self.rng = random.Random(seed) if seed is not None else None
        self.deployment = deployment
        self.pattern = pattern
        self.window = window
        self.nodes: dict[bytes, SimNode] = {}
        self.names: dict[str, bytes] = {}
        self._links: set[frozenset] | None = None
        self._pending_links = list(links) if links is not None else None
        self.taps: set[tuple[bytes, bytes]] = set()
        self.tap_everything = False
        self.tap_log: list[TapRecord] = []
        self.corrupted: set[bytes] = set()
        self.pairs: dict[tuple[bytes, bytes], PairKey] = {}
        self._seq = 0

    # -- topology ---------------------------------------------------------

    def add_node(self, name: str) -> bytes:
        if name in self.names:
            raise ValueError(f"duplicate node name {name!r}")
        addr = address_for(name)
        relay = SetupNode.generate(addr, self.rng, table=PatternTable(), pattern=self.pattern,
                                   window=self.window, deployment=self.deployment)
        ctx = NodeContext(addr, relay.table, self.deployment, self.rng)
        self.nodes[addr] = SimNode(name, relay, ctx)
        self.names[name] = addr
        if self._pending_links is not None:
            self._resolve_links()
        return addr

    def add_nodes(self, names: Iterable[str]) -> list[bytes]:
        return [self.add_node(n) for n in names]

    def _resolve_links(self) -> None:
        resolved = set()
        for a, b in self._pending_links:
            if a in self.names and b in self.names:
                resolved.add(frozenset((self.names[a], self.names[b])))
        self._links = resolved

    def add_link(self, a: str, b: str) -> None:
        if self._pending_links is None:
            self._pending_links = []
        self._pending_links.append((a, b))
        self._resolve_links()

    def addr(self, name_or_addr) -> bytes:
        if isinstance(name_or_addr, bytes):
            if name_or_addr not in self.nodes:
                raise UnknownNodeError(format_address(name_or_addr))
            return name_or_addr
        try:
            return self.names[name_or_addr]
        except KeyError:
            raise UnknownNodeError(name_or_addr) from None

    def node(self, name_or_addr) -> SimNode:
        return self.nodes[self.addr(name_or_addr)]

    def name_of(self, addr: bytes) -> str:
        node = self.nodes.get(addr)
        return node.name if node else format_address(addr)

    def has_link(self, a: bytes, b: bytes) -> bool:
        return self._links is None or frozenset((a, b)) in self._links

    # -- observation and corruption --------------------------------------

    def tap(self, a, b) -> None:
        """Record every frame sent from ``a`` to ``b``."""
        self.taps.add((self.addr(a), self.addr(b)))

    def tap_all(self, enabled: bool = True) -> None:
        self.tap_everything = enabled

    def observed(self, a, b) -> list[bytes]:
        src, dst = self.addr(a), self.addr(b)
        return [r.frame for r in self.tap_log if r.src == src and r.dst == dst]

    def corrupt(self, *names) -> None:
        for n in names:
            self.corrupted.add(self.addr(n))

    def clear_observations(self) -> None:
        self.tap_log.clear()
        for node in self.nodes.values():
            node.traces.clear()

    # -- keys -------------------------------------------------------------

    def _random(self, n: int) -> bytes:
        return random_bytes(self.rng, n)

    def install_pair_key(self, source: bytes, node: bytes, master_key: bytes) -> PairKey:
        old = self.pairs.pop((source, node), None)
        table = self.nodes[node].table
        if old is not None:
            table.unregister_session(old.session_id)
        sid = table.register_session(master_key, self.pattern, self.window)
        pk = self.pairs[(source, node)] = PairKey(master_key, sid)
        return pk

    def pair_key(self, source, node) -> PairKey:
        """The (source, node) master key, created on first use."""
        source, node = self.addr(source), self.addr(node)
        pk = self.pairs.get((source, node))
        if pk is None:
            pk = self.install_pair_key(source, node, self._random(KEY_SIZE))
        return pk

    def rekey(self, sources: Iterable | None = None) -> None:
        """Forget pairwise keys (of ``sources``, or all) so fresh ones are drawn."""
        wanted = None if sources is None else {self.addr(s) for s in sources}
        for (src, node), pk in list(self.pairs.items()):
            if wanted is None or src in wanted:
                self.nodes[node].table.unregister_session(pk.session_id)
                del self.pairs[(src, node)]

    def provision(self, source, hops: Sequence) -> Session:
        """Direct key provisioning, bypassing the setup handshake."""
        src = self.addr(source)
        addrs = [self.addr(h) for h in hops]
        self._check_path(src, addrs)
        keys = [self.pair_key(src, a).master_key for a in addrs]
        return Session(src, addrs, keys, self.pattern)

    def _check_path(self, src: bytes, addrs: list[bytes]) -> None:
        if not addrs:
            raise ValueError("empty path")
        if len(addrs) > self.deployment.l_pmax:
            raise PathTooLongError(f"path of {len(addrs)} hops exceeds l_pmax={self.deployment.l_pmax}")
        if src in addrs:
            raise ValueError("source cannot be on its own path")

    def setup_path(self, source, hops: Sequence, data: bytes = b"") -> Session:
        """Run the setup handshake over the network and return the session.

        Each hop installs the key it computed. The source keeps the keys it
        computed on its side; a mismatch surfaces later as data drops.
        """
        src = self.addr(source)
        addrs = [self.addr(h) for h in hops]
        self._check_path(src, addrs)
        relays = [self.nodes[a].relay for a in addrs]
        chain = setup_keygen([r.public for r in relays], self.rng, self.deployment.l_pmax)
        first, header, body = create_setup_packet(
            [(r.address, r.public) for r in relays], data, self.pattern, self.window,
            self.rng, chain, self.deployment,
        )
        frame = wire.encode(wire.PacketKind.SETUP, src, first, header, body, self.deployment)
        prev = src
        hop = 0
        while True:
            outcome = self.transmit(prev, addrs[hop], frame)
            if not isinstance(outcome, Forward):
                break
            if hop + 1 >= len(addrs) or outcome.next_addr != addrs[hop + 1]:
                raise AriadneError("setup packet left its path")
            prev, hop = addrs[hop], hop + 1
            frame = wire.encode(wire.PacketKind.SETUP, prev, outcome.next_addr,
                                outcome.header, outcome.body, self.deployment)
        if not isinstance(outcome, Deliver):
            raise AriadneError(f"setup dropped at hop {hop + 1}: {outcome.reason.value}")
        for a, relay, mat in zip(addrs, relays, chain.hops):
            installed = relay.installed[-1]
            old = self.pairs.pop((src, a), None)
            if old is not None:
                relay.table.unregister_session(old.session_id)
            self.pairs[(src, a)] = PairKey(installed.master_key, installed.session_id)
        return Session(src, addrs, chain.master_keys, self.pattern)

    # -- delivery ---------------------------------------------------------

    def transmit(self, src: bytes, dst: bytes, frame: bytes):
        """Carry ``frame`` over the link ``src -> dst`` and let ``dst`` process it."""
        node = self.nodes.get(dst)
        if node is None:
            raise UnknownNodeError(format_address(dst))
        if not self.has_link(src, dst):
            raise AriadneError(f"no link {self.name_of(src)} -> {self.name_of(dst)}")
        seq = self._seq
        self._seq += 1
        if self.tap_everything or (src, dst) in self.taps:
            self.tap_log.append(TapRecord(seq, src, dst, frame))
        try:
            pkt = wire.decode(frame, self.deployment)
        except MalformedPacketError:
            node.traces.append(TraceRecord(seq, "unknown", src, -1, "drop", "malformed"))
            return Drop(DropReason.MALFORMED)
        if pkt.kind is wire.PacketKind.SETUP:
            outcome = process_setup_packet(node.relay, pkt.header, pkt.body)
        else:
            outcome = process_packet(node.ctx, pkt.header, pkt.body)
        node.traces.append(_trace(seq, pkt, src, outcome))
        return outcome

    def send(self, session: Session, payload: bytes, t: int | None = None, tamper=None,
             index: int = 0) -> PacketReport:
        """Create one data packet and walk it hop by hop."""
        if t is None:
            t = session.next_t
        session.next_t = max(session.next_t, t + 1)
        first, header, body = create_packet(session.path_spec(), t, session.pattern, payload,
                                            self.rng, self.deployment)
        frame = wire.encode(wire.PacketKind.DATA, session.source, first, header, body, self.deployment)
        return self.walk(session, frame, index=index, t=t, tamper=tamper)

    def walk(self, session: Session, frame: bytes, *, index: int = 0, t: int = -1,
             tamper: Callable | None = None) -> PacketReport:
        prev = session.source
        dst = session.hops[0]
        results = []
        report = PacketReport(index, t, results)
        for hop in range(len(session.hops) + 1):
            if tamper is not None:
                frame = tamper(index, hop, frame)
            outcome = self.transmit(prev, dst, frame)
            if isinstance(outcome, Forward):
                results.append(HopResult(dst, "forward", next_addr=outcome.next_addr))
                if outcome.next_addr not in self.nodes:
                    raise UnknownNodeError(format_address(outcome.next_addr))
                prev, dst = dst, outcome.next_addr
                frame = wire.encode(wire.PacketKind.DATA, prev, dst, outcome.header, outcome.body,
                                    self.deployment)
                continue
            if isinstance(outcome, Deliver):
                results.append(HopResult(dst, "deliver"))
                report.delivered = outcome.payload
            else:
                results.append(HopResult(dst, "drop", outcome.reason.value))
            return report
        raise AriadneError("packet forwarded past the end of its path")

    # -- export -----------------------------------------------------------

    def transcript_records(self) -> list[dict]:
        recs = [
            {"type": "frame", "seq": r.seq, "src": self.name_of(r.src), "dst": self.name_of(r.dst),
             "frame": r.frame.hex()}
            for r in self.tap_log
        ]
        for node in self.nodes.values():
            for tr in node.traces:
                recs.append({
                    "type": "trace", "seq": tr.seq, "node": node.name, "kind": tr.kind,
                    "prev": self.name_of(tr.prev_addr), "pointer": tr.pointer,
                    "outcome": tr.outcome, "reason": tr.reason,
                    "next": self.name_of(tr.next_addr) if tr.next_addr else None,
                    "session_id": tr.session_id, "t": tr.t,
                })
        recs.sort(key=lambda r: (r["seq"], r["type"]))
        return recs

    def export_transcript(self, path) -> int:
        """Write taps and traces as JSON lines in delivery order."""
        recs = self.transcript_records()
        with open(path, "w") as fh:
            for r in recs:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
        return len(recs)


def _trace(seq: int, pkt: wire.WirePacket, src: bytes, outcome) -> TraceRecord:
    kind = "setup" if pkt.kind is wire.PacketKind.SETUP else "data"
    ptr = pkt.header.pointer
    if isinstance(outcome, Forward):
        return TraceRecord(seq, kind, src, ptr, "forward", None, outcome.next_addr, outcome.session_id, outcome.t)
    if isinstance(outcome, Deliver):
        return TraceRecord(seq, kind, src, ptr, "deliver", None, None, outcome.session_id, outcome.t)
    return TraceRecord(seq, kind, src, ptr, "drop", outcome.reason.value)


def run_path(net: SimNetwork, session: Session, payloads: Sequence[bytes], start_t: int | None = None,
             *, tamper: Callable[[int, int, bytes], bytes] | None = None,
             order: Sequence[int] | None = None, lose: Iterable[int] = ()) -> DeliveryReport:
    """Send ``payloads`` along ``session`` with counters ``start_t, start_t + 1, ...``.

    Packets are all created first, then injected in ``order`` (a
    permutation of packet indices; default is creation order). Indices in
    ``lose`` are created but never injected. ``tamper(index, hop, frame)``
    may rewrite the frame on the link into hop ``hop`` (0 is the source's
    outgoing link).
    """
    start = session.next_t if start_t is None else start_t
    for addr in session.hops:
        net.addr(addr)
    frames = []
    for i, payload in enumerate(payloads):
        t = start + i
        first, header, body = create_packet(session.path_spec(), t, session.pattern, payload,
                                            net.rng, net.deployment)
        frames.append((t, wire.encode(wire.PacketKind.DATA, session.source, first, header, body,
                                      net.deployment)))
    session.next_t = max(session.next_t, start + len(payloads))
    idx = list(range(len(frames))) if order is None else list(order)
    if sorted(idx) != list(range(len(frames))):
        raise ValueError("order must be a permutation of packet indices")
    lost = set(lose)
    reports: dict[int, PacketReport] = {}
    for i in idx:
        t, frame = frames[i]
        if i in lost:
            reports[i] = PacketReport(i, t, [], lost=True)
            continue
        reports[i] = net.walk(session, frame, index=i, t=t, tamper=tamper)
    return DeliveryReport(session, [reports[i] for i in range(len(frames))])
