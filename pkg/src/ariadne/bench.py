"""Packet creation and processing latency, per packet kind and hop count.

Methodology: warm the measured operation up for a while, then collect
100 samples. A sample times a batch of at least 64 back-to-back calls on
a monotonic clock and divides by the batch size. State that a call
consumes (a pattern-table window, a node's key store) is rebuilt between
samples, outside the timed region.

Reports are JSON lines, one per (kind, role, hops) cell.
"""
from __future__ import annotations

import gc
import json
import math
import random
import statistics
import time
from collections.abc import Callable, Iterable
from dataclasses import asdict, dataclass

from .crypto import random_bytes
from .data_protocol import Hop, NodeContext, create_packet, process_packet
from .deployment import DEFAULT_DEPLOYMENT, DEFAULT_PATTERN, DEFAULT_WINDOW, FRAME_SIZE
from .key_reference import MAX_WINDOW, PatternTable
from .setup_protocol import SetupNode, create_setup_packet, process_setup_packet

KINDS = ("data", "setup")
ROLES = ("create", "process")
SAMPLES = 100
MIN_BATCH = 64
PAYLOAD = bytes(64)


@dataclass(frozen=True)
class BenchCell:
    kind: str
    role: str
    hops: int
    mean_us: float
    std_us: float
    samples: int
    batch: int

    @property
    def packets_per_s(self) -> float:
        return 1e6 / self.mean_us

    @property
    def bits_per_s(self) -> float:
        return self.packets_per_s * FRAME_SIZE * 8

    def to_record(self) -> str:
        rec = asdict(self)
        rec["pps"] = self.packets_per_s
        rec["bps"] = self.bits_per_s
        return json.dumps(rec, sort_keys=True)

    @classmethod
    def from_record(cls, line: str) -> "BenchCell":
        rec = json.loads(line)
        cell = cls(**{k: rec[k] for k in ("kind", "role", "hops", "mean_us", "std_us", "samples", "batch")})
        if "bps" in rec and not math.isclose(rec["bps"], cell.bits_per_s, rel_tol=1e-9):
            raise ValueError("record throughput does not match its mean latency")
        return cell


@dataclass
class BenchReport:
    cells: list[BenchCell]

    def cell(self, kind: str, role: str, hops: int) -> BenchCell:
        for c in self.cells:
            if (c.kind, c.role, c.hops) == (kind, role, hops):
                return c
        raise KeyError((kind, role, hops))

    def to_text(self) -> str:
        return "".join(c.to_record() + "\n" for c in self.cells)

    @classmethod
    def parse(cls, text: str) -> "BenchReport":
        return cls([BenchCell.from_record(line) for line in text.splitlines() if line.strip()])


# ---------------------------------------------------------------------------
# workloads: each returns (prepare, run) where prepare() rebuilds per-sample
# state and run(state, i) performs the i-th call of a batch

def _path(hops: int, rng) -> list[Hop]:
    return [Hop(bytes([0xFD, i]) + random_bytes(rng, 14), random_bytes(rng, 32)) for i in range(hops)]


def _data_create(hops, batch, rng):
    path = _path(hops, rng)

    def prepare():
        return None

    def run(_, i):
        create_packet(path, i, DEFAULT_PATTERN, PAYLOAD, rng)
    return prepare, run


def _data_process(hops, batch, rng):
    # the node under test is hop 1 of an ``hops``-hop path
    path = _path(hops, rng)
    pool = [create_packet(path, t, DEFAULT_PATTERN, PAYLOAD, rng)[1:] for t in range(batch)]
    me = path[0]

    def prepare():
        table = PatternTable()
        table.register_session(me.master_key, DEFAULT_PATTERN, batch)
        return NodeContext(me.address, table, DEFAULT_DEPLOYMENT, rng)

    def run(ctx, i):
        header, body = pool[i]
        process_packet(ctx, header, body)
    return prepare, run


def _setup_relays(hops, rng):
    return [SetupNode.generate(bytes([0xFD, i]) + random_bytes(rng, 14), rng) for i in range(hops)]


def _setup_create(hops, batch, rng):
    relays = _setup_relays(hops, rng)
    path = [(r.address, r.public) for r in relays]

    def prepare():
        return None

    def run(_, i):
        create_setup_packet(path, PAYLOAD, DEFAULT_PATTERN, DEFAULT_WINDOW, rng)
    return prepare, run


def _setup_process(hops, batch, rng):
    # distinct packets, so no call takes the replayed-setup path
    relays = _setup_relays(hops, rng)
    me = relays[0]
    path = [(r.address, r.public) for r in relays]
    pool = [create_setup_packet(path, PAYLOAD, DEFAULT_PATTERN, DEFAULT_WINDOW, rng)[1:]
            for _ in range(batch)]

    def prepare():
        return SetupNode(me.address, me.secret, me.public, PatternTable(capacity=1 << 24), rng=rng)

    def run(node, i):
        header, body = pool[i]
        process_setup_packet(node, header, body)
    return prepare, run


WORKLOADS: dict[tuple[str, str], Callable] = {
    ("data", "create"): _data_create,
    ("data", "process"): _data_process,
    ("setup", "create"): _setup_create,
    ("setup", "process"): _setup_process,
}


def _timed_batch(prepare, run, batch: int) -> float:
    state = prepare()
    gc_was = gc.isenabled()
    gc.disable()
    try:
        start = time.perf_counter_ns()
        for i in range(batch):
            run(state, i)
        elapsed = time.perf_counter_ns() - start
    finally:
        if gc_was:
            gc.enable()
    return elapsed / batch / 1e3


def measure(kind: str, role: str, hops: int, *, duration: float = 2.0, warmup: float = 3.0,
            samples: int = SAMPLES, min_batch: int = MIN_BATCH, seed: int | None = None) -> BenchCell:
    """One cell. ``duration`` is a target for the timed part, in seconds."""
    if (kind, role) not in WORKLOADS:
        raise ValueError(f"unknown workload {kind}/{role}")
    if not 1 <= hops <= DEFAULT_DEPLOYMENT.l_pmax:
        raise ValueError(f"hops must be within [1, {DEFAULT_DEPLOYMENT.l_pmax}]")
    if samples < 1 or min_batch < 1:
        raise ValueError("samples and batch must be positive")
    rng = random.Random(seed) if seed is not None else None
    factory = WORKLOADS[(kind, role)]

    # estimate the per-call cost to size batches
    prepare, run = factory(hops, min_batch, rng)
    probe = _timed_batch(prepare, run, min_batch)
    batch = max(min_batch, int(duration / samples / (probe * 1e-6)))
    if (kind, role) == ("data", "process"):
        batch = min(batch, MAX_WINDOW)
    if batch != min_batch:
        prepare, run = factory(hops, batch, rng)

    deadline = time.monotonic() + warmup
    while time.monotonic() < deadline:
        _timed_batch(prepare, run, batch)

    results = [_timed_batch(prepare, run, batch) for _ in range(samples)]
    std = statistics.stdev(results) if len(results) > 1 else 0.0
    return BenchCell(kind, role, hops, statistics.fmean(results), std, samples, batch)


def run_bench(kinds: Iterable[str] = KINDS, roles: Iterable[str] = ROLES, hops: Iterable[int] = range(1, 6),
              **kw) -> BenchReport:
    cells = [measure(k, r, h, **kw) for k in kinds for r in roles for h in hops]
    return BenchReport(cells)

