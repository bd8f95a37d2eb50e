"""Executable session-unlinkability games.

One trial of either game:

1. fresh pairwise master keys are drawn for every source involved,
2. ``Pkt_1`` (counter 0) travels path ``P`` from source ``S``,
3. a fair bit ``b`` is flipped; ``Pkt_2`` (counter 1) travels ``P`` from
   ``S`` when ``b = 0``, otherwise the alternative,
4. the adversary sees both packets as they leave the honest node ``H``.

The path-session game's alternative is path ``P'``: different nodes before
``H``, identical from ``H`` onwards, same source. The source-session
game's alternative is path ``P`` from another source ``S'``.

An A_2 adversary additionally receives the master keys of every corrupted
node and the views (table contents, processing traces) of the corrupted
nodes after ``H``, which are the nodes that actually handle the two
challenge packets once they have left ``H``. What happens before ``H`` is
internal to the challenger.

Several adversaries can be scored on the same transcripts, so one run of
the game evaluates them all against identical challenges.
"""
from __future__ import annotations

import math
import random
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .. import wire
from ..crypto import derive_temp_keys, encrypt_pattern, keystream
from ..deployment import ADDRESS_SIZE, ELEMENT_SIZE, PATTERN_SIZE
from ..errors import AriadneError
from .network import SimNetwork, TapRecord, TraceRecord

PATH_SESSION = "path-session"
SOURCE_SESSION = "source-session"


class GameSetupError(AriadneError, ValueError):
    pass


@dataclass(frozen=True)
class CorruptedView:
    address: bytes
    master_keys: Mapping[bytes, bytes]          # source address -> key
    table: tuple[tuple[int, int, bytes], ...]   # live (session_id, t, prefix)
    traces: tuple[TraceRecord, ...]


@dataclass(frozen=True)
class Challenge:
    """Everything the adversary is allowed to see in one trial."""

    game: str
    honest: bytes
    source: bytes
    path: tuple[bytes, ...]
    alt_source: bytes
    alt_path: tuple[bytes, ...]
    packets: tuple[TapRecord, ...]              # Pkt_1 then Pkt_2, on H's outgoing link
    adversary_class: str = "A1"
    keys: Mapping[tuple[bytes, bytes], bytes] = field(default_factory=dict)
    corrupted_views: Mapping[bytes, CorruptedView] = field(default_factory=dict)
    pattern: bytes = b""
    counters: tuple[int, int] = (0, 1)

    def frames(self) -> tuple[wire.WirePacket, wire.WirePacket]:
        a, b = self.packets
        return wire.decode(a.frame), wire.decode(b.frame)

    @property
    def next_hop(self) -> bytes:
        return self.path[self.path.index(self.honest) + 1]


@dataclass
class GameTranscript:
    challenge: Challenge
    b: int
    guesses: dict[str, int] = field(default_factory=dict)


Adversary = Callable[[Challenge, random.Random], int]


@dataclass
class GameResult:
    game: str
    adversary: str
    adversary_class: str
    trials: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.trials

    @property
    def advantage(self) -> float:
        return abs(self.accuracy - 0.5)

    @property
    def stderr(self) -> float:
        """Standard error of the accuracy when the adversary is guessing."""
        return 0.5 / math.sqrt(self.trials)

    def within(self, k: float = 3.0) -> bool:
        return self.advantage <= k * self.stderr

    def as_dict(self) -> dict:
        return {
            "game": self.game, "adversary": self.adversary, "class": self.adversary_class,
            "trials": self.trials, "correct": self.correct, "accuracy": self.accuracy,
            "advantage": self.advantage, "stderr": self.stderr,
        }


# ---------------------------------------------------------------------------
# built-in adversaries

def null_adversary(ch: Challenge, rng: random.Random) -> int:
    return rng.getrandbits(1)


def byte_equality_adversary(ch: Challenge, rng: random.Random) -> int:
    """Guess "same session" when any routing-vector byte matches."""
    p1, p2 = ch.frames()
    v1, v2 = p1.body.routing_vector, p2.body.routing_vector
    return 0 if any(x == y for x, y in zip(v1, v2)) else 1


def pointer_equality_adversary(ch: Challenge, rng: random.Random) -> int:
    p1, p2 = ch.frames()
    return 0 if p1.header.pointer == p2.header.pointer else 1


def _predecessor(path: Sequence[bytes], honest: bytes, source: bytes) -> bytes:
    j = list(path).index(honest)
    return path[j - 1] if j > 0 else source


def _marks_predecessor(ch: Challenge, frame: wire.WirePacket, source: bytes, path,
                       honest_key: bytes | None) -> bool:
    """Does some slot of ``frame`` unmask to the predecessor's element?

    After hop ``j-1`` its slot holds ``r* xor header-stream(j-1)``; H then
    XORs its own packet stream over everything. With the predecessor's key
    the first layer comes off; H's layer only comes off with H's key.
    """
    pred = _predecessor(path, ch.honest, source)
    if pred == source:
        return False
    key = ch.keys.get((source, pred))
    if key is None:
        return False
    t = ch.counters[1]
    vsize = len(frame.body.routing_vector)
    pred_stream = keystream(derive_temp_keys(key, t).enc, ELEMENT_SIZE + vsize)[ELEMENT_SIZE:]
    if honest_key is not None:
        h_stream = keystream(derive_temp_keys(honest_key, t).enc, ELEMENT_SIZE + vsize)[ELEMENT_SIZE:]
    else:
        h_stream = bytes(vsize)
    vec = frame.body.routing_vector
    for s in range(vsize // ELEMENT_SIZE):
        off = s * ELEMENT_SIZE
        elem = bytes(a ^ b ^ c for a, b, c in zip(vec[off:off + ELEMENT_SIZE],
                                                 pred_stream[off:off + ELEMENT_SIZE],
                                                 h_stream[off:off + ELEMENT_SIZE]))
        if elem[:PATTERN_SIZE] == ch.pattern and elem[PATTERN_SIZE:PATTERN_SIZE + ADDRESS_SIZE] == ch.honest:
            return True
    return False


def upstream_peeling_adversary(ch: Challenge, rng: random.Random, honest_key: bytes | None = None) -> int:
    """Look for the element of H's predecessor inside ``Pkt_2``.

    Uses the corrupted predecessors' keys under both hypotheses. Without
    H's key its packet stream still masks every slot, so this should be no
    better than a coin flip; :func:`leaked_key_adversary` hands it H's key
    to show the test itself has teeth.
    """
    _, p2 = ch.frames()
    hit0 = _marks_predecessor(ch, p2, ch.source, ch.path, honest_key)
    hit1 = _marks_predecessor(ch, p2, ch.alt_source, ch.alt_path, honest_key)
    if hit0 != hit1:
        return 0 if hit0 else 1
    return rng.getrandbits(1)


def leaked_key_adversary(honest_key_of: Callable[[Challenge], bytes | None]) -> Adversary:
    def adv(ch: Challenge, rng: random.Random) -> int:
        return upstream_peeling_adversary(ch, rng, honest_key_of(ch))
    adv.__name__ = "leaked-key"
    return adv


def downstream_peeling_adversary(ch: Challenge, rng: random.Random) -> int:
    """Remove the next hop's layer with the key ``S`` shares with it.

    The next hop after H is corrupted. If its key for source ``S`` at
    counter 1 names the pointed slot, ``Pkt_2`` came from ``S``. In the
    path-session game both hypotheses share that key, so the test cannot
    separate them.
    """
    _, p2 = ch.frames()
    nxt = ch.next_hop
    key = ch.keys.get((ch.source, nxt))
    if key is None:
        return rng.getrandbits(1)
    prefix = encrypt_pattern(derive_temp_keys(key, ch.counters[1]).enc, ch.pattern)
    off = p2.header.pointer * ELEMENT_SIZE
    hit = p2.body.routing_vector[off:off + PATTERN_SIZE] == prefix
    if ch.game == SOURCE_SESSION:
        return 0 if hit else 1
    # under path-session both packets match; the test gives no information
    return rng.getrandbits(1) if hit else 1


def key_reuse_adversary(ch: Challenge, rng: random.Random) -> int:
    """Ask the corrupted next hop whether both packets used one session's keys."""
    view = ch.corrupted_views.get(ch.next_hop)
    if view is None:
        return rng.getrandbits(1)
    sessions = [tr.session_id for tr in view.traces if tr.outcome != "drop"]
    if len(sessions) < 2:
        return rng.getrandbits(1)
    return 0 if sessions[0] == sessions[1] else 1


ADVERSARIES_A1: dict[str, Adversary] = {
    "null": null_adversary,
    "byte-equality": byte_equality_adversary,
    "pointer-equality": pointer_equality_adversary,
}
ADVERSARIES_A2: dict[str, Adversary] = {
    "upstream-peeling": upstream_peeling_adversary,
    "downstream-peeling": downstream_peeling_adversary,
    "key-reuse": key_reuse_adversary,
}
BUILTIN_ADVERSARIES = {**ADVERSARIES_A1, **ADVERSARIES_A2}


def adversary_class(name: str) -> str:
    return "A2" if name in ADVERSARIES_A2 or name == "leaked-key" else "A1"


# ---------------------------------------------------------------------------
# game scaffolding

@dataclass(frozen=True)
class GameSpec:
    game: str
    honest: str
    source: str
    path: tuple[str, ...]
    alt_source: str
    alt_path: tuple[str, ...]


def path_session_spec(honest: str, source: str, path: Sequence[str], alt_path: Sequence[str]) -> GameSpec:
    return GameSpec(PATH_SESSION, honest, source, tuple(path), source, tuple(alt_path))


def source_session_spec(honest: str, source: str, alt_source: str, path: Sequence[str]) -> GameSpec:
    return GameSpec(SOURCE_SESSION, honest, source, tuple(path), alt_source, tuple(path))


def _validate(net: SimNetwork, spec: GameSpec) -> None:
    h = net.addr(spec.honest)
    if h in net.corrupted:
        raise GameSetupError("the honest node is in the corrupted set")
    for path in (spec.path, spec.alt_path):
        addrs = [net.addr(n) for n in path]
        if h not in addrs:
            raise GameSetupError("both challenge paths must pass through the honest node")
        if addrs[-1] == h:
            raise GameSetupError("the honest node needs a successor to observe its outgoing link")
    j, k = spec.path.index(spec.honest), spec.alt_path.index(spec.honest)
    if spec.path[j:] != spec.alt_path[k:]:
        raise GameSetupError("challenge paths must agree from the honest node onwards")
    if spec.game == PATH_SESSION:
        if spec.source != spec.alt_source:
            raise GameSetupError("path-session challenges share one source")
        if spec.path[:j] == spec.alt_path[:k]:
            raise GameSetupError("path-session challenges must differ before the honest node")
    elif spec.game == SOURCE_SESSION:
        if spec.source == spec.alt_source or spec.path != spec.alt_path:
            raise GameSetupError("source-session challenges share the path and differ in source")
    else:
        raise GameSetupError(f"unknown game {spec.game!r}")


def _view(net: SimNetwork, addr: bytes, keys) -> CorruptedView:
    node = net.nodes[addr]
    live = []
    for sid in node.table.sessions():
        for t, (prefix, _cand) in node.table.session(sid).live.items():
            live.append((sid, t, prefix))
    return CorruptedView(
        addr,
        {src: k for (src, dst), k in keys.items() if dst == addr},
        tuple(live),
        tuple(node.traces),
    )


def play_trial(net: SimNetwork, spec: GameSpec, adversary_class_: str, rng: random.Random,
               payloads: tuple[bytes, bytes] = (b"first", b"second")) -> GameTranscript:
    """Run one challenge and return the transcript (adversaries not yet asked)."""
    h = net.addr(spec.honest)
    src, alt_src = net.addr(spec.source), net.addr(spec.alt_source)
    path = tuple(net.addr(n) for n in spec.path)
    alt_path = tuple(net.addr(n) for n in spec.alt_path)
    nxt = path[path.index(h) + 1]

    net.rekey({src, alt_src})
    net.clear_observations()
    s1 = net.provision(src, path)
    b = rng.getrandbits(1)
    s2 = net.provision(alt_src, alt_path) if b else s1

    # a recorder on H's outgoing link only
    saved = (set(net.taps), net.tap_everything)
    net.taps, net.tap_everything = {(h, nxt)}, False
    try:
        r1 = net.send(s1, payloads[0], t=0)
        # downstream traces start with the challenge packets
        r2 = net.send(s2, payloads[1], t=1)
    finally:
        net.taps, net.tap_everything = saved
    if r1.delivered is None or r2.delivered is None:
        raise AriadneError("a challenge packet was dropped")
    packets = tuple(r for r in net.tap_log if r.src == h and r.dst == nxt)

    keys: dict = {}
    views: dict = {}
    if adversary_class_ == "A2":
        for (s, d), pk in net.pairs.items():
            if d in net.corrupted and d != h:
                keys[(s, d)] = pk.master_key
        downstream = path[path.index(h) + 1:]
        views = {d: _view(net, d, keys) for d in downstream if d in net.corrupted}
    ch = Challenge(spec.game, h, src, path, alt_src, alt_path, packets, adversary_class_,
                   keys, views, net.pattern)
    return GameTranscript(ch, b)


def run_game(net: SimNetwork, spec: GameSpec, trials: int,
             adversaries: Mapping[str, Adversary], *, seed: int | None = None,
             adversary_class_: str | None = None,
             keep_transcripts: bool = False) -> tuple[dict[str, GameResult], list[GameTranscript]]:
    """Play ``trials`` challenges and score every adversary on each."""
    if trials < 1:
        raise GameSetupError("trials must be positive")
    _validate(net, spec)
    if adversary_class_ is None:
        adversary_class_ = "A2" if any(adversary_class(n) == "A2" for n in adversaries) else "A1"
    game_rng = random.Random(seed) if seed is not None else (net.rng or random.Random())
    adv_rng = random.Random(game_rng.getrandbits(64))
    correct = dict.fromkeys(adversaries, 0)
    kept = []
    for _ in range(trials):
        tr = play_trial(net, spec, adversary_class_, game_rng)
        for name, adv in adversaries.items():
            guess = adv(tr.challenge, adv_rng)
            tr.guesses[name] = guess
            correct[name] += guess == tr.b
        if keep_transcripts:
            kept.append(tr)
    results = {
        name: GameResult(spec.game, name, adversary_class(name), trials, c)
        for name, c in correct.items()
    }
    return results, kept


def path_session_game(net: SimNetwork, honest: str, trials: int, adversary: Adversary | str,
                      *, source: str, path: Sequence[str], alt_path: Sequence[str],
                      seed: int | None = None) -> GameResult:
    name, fn = _named(adversary)
    results, _ = run_game(net, path_session_spec(honest, source, path, alt_path), trials,
                          {name: fn}, seed=seed)
    return results[name]


def source_session_game(net: SimNetwork, honest: str, trials: int, adversary: Adversary | str,
                        *, source: str, alt_source: str, path: Sequence[str],
                        seed: int | None = None) -> GameResult:
    name, fn = _named(adversary)
    results, _ = run_game(net, source_session_spec(honest, source, alt_source, path), trials,
                          {name: fn}, seed=seed)
    return results[name]


def _named(adversary) -> tuple[str, Adversary]:
    if isinstance(adversary, str):
        return adversary, BUILTIN_ADVERSARIES[adversary]
    return getattr(adversary, "__name__", "custom"), adversary


# ---------------------------------------------------------------------------
# default topology

DEFAULT_NODES = ("S", "S2", "U1", "U2", "V1", "H", "D1", "D2")
DEFAULT_HONEST = "H"
DEFAULT_PATH = ("U1", "U2", "H", "D1", "D2")
DEFAULT_ALT_PATH = ("V1", "H", "D1", "D2")


def default_game_network(seed: int | None = None, window: int = 4) -> SimNetwork:
    """Two sources, two disjoint prefixes into H, two corrupted nodes after it."""
    net = SimNetwork(seed, window=window)
    net.add_nodes(DEFAULT_NODES)
    net.corrupt(*(n for n in DEFAULT_NODES if n not in ("S", "S2", DEFAULT_HONEST)))
    return net


def default_specs() -> dict[str, GameSpec]:
    return {
        PATH_SESSION: path_session_spec(DEFAULT_HONEST, "S", DEFAULT_PATH, DEFAULT_ALT_PATH),
        SOURCE_SESSION: source_session_spec(DEFAULT_HONEST, "S", "S2", DEFAULT_PATH),
    }


# ---------------------------------------------------------------------------
# structural byte equality between consecutive packets of one session

@dataclass(frozen=True)
class EqualityProfile:
    pairs: int
    pointer_matches: int
    vector_matches: int
    payload_matches: int
    vector_bytes: int
    payload_bytes: int

    @property
    def bytes_per_pair(self) -> int:
        return 1 + self.vector_bytes + self.payload_bytes

    @property
    def pooled_rate(self) -> float:
        total = self.pointer_matches + self.vector_matches + self.payload_matches
        return total / (self.pairs * self.bytes_per_pair)

    @property
    def body_rate(self) -> float:
        """Equality rate over vector and payload, the pointer excluded."""
        n = self.pairs * (self.vector_bytes + self.payload_bytes)
        return (self.vector_matches + self.payload_matches) / n

    @property
    def pointer_rate(self) -> float:
        return self.pointer_matches / self.pairs


def equality_profile(net: SimNetwork, source: str, path: Sequence[str], observe_after: str,
                     pairs: int) -> EqualityProfile:
    """Compare consecutive packets of one session on the link leaving ``observe_after``.

    Sends ``2 * pairs`` packets; pair ``k`` is counters ``2k`` and ``2k + 1``.
    """
    session = net.provision(source, path)
    a = net.addr(observe_after)
    nxt = session.hops[session.hops.index(a) + 1]
    saved = (set(net.taps), net.tap_everything)
    net.taps, net.tap_everything = {(a, nxt)}, False
    ptr = vec = pay = 0
    vsize = psize = 0
    try:
        for _ in range(pairs):
            del net.tap_log[:]
            for k in range(2):
                rep = net.send(session, b"probe %d" % k)
                if rep.delivered is None:
                    raise AriadneError(f"probe dropped at {rep.dropped}")
            p1, p2 = (wire.decode(r.frame, net.deployment) for r in net.tap_log)
            ptr += p1.header.pointer == p2.header.pointer
            vec += _equal_bytes(p1.body.routing_vector, p2.body.routing_vector)
            pay += _equal_bytes(p1.body.payload, p2.body.payload)
            vsize, psize = len(p1.body.routing_vector), len(p1.body.payload)
    finally:
        net.taps, net.tap_everything = saved
        del net.tap_log[:]
    return EqualityProfile(pairs, ptr, vec, pay, vsize, psize)


def _equal_bytes(x: bytes, y: bytes) -> int:
    return int(np.count_nonzero(np.frombuffer(x, np.uint8) == np.frombuffer(y, np.uint8)))


# ---------------------------------------------------------------------------
# verdicts

WITHIN = "within-3sigma"
LIMITATION = "expected-limitation"
INFORMATIONAL = "informational"
LIMITATION_FLOOR = 0.45

# distinguishers that succeed in the source-session game under A_2 by design:
# a corrupted relay after H sees which source's keys a packet used
_SOURCE_LINKERS = frozenset({"key-reuse", "downstream-peeling"})


def expectation_for(game: str, adversary: str) -> str:
    if adversary_class(adversary) == "A1" or game == PATH_SESSION:
        return WITHIN
    return LIMITATION if adversary in _SOURCE_LINKERS else INFORMATIONAL


@dataclass(frozen=True)
class Verdict:
    result: GameResult
    expectation: str

    @property
    def passed(self) -> bool:
        if self.expectation == WITHIN:
            return self.result.within(3.0)
        if self.expectation == LIMITATION:
            return self.result.advantage >= LIMITATION_FLOOR
        return True


def play_all(make_net: Callable[[], SimNetwork], specs: Sequence[GameSpec],
             adversaries: Mapping[str, Sequence[str]], trials: int,
             seed: int | None = None) -> list[Verdict]:
    """Run every spec once per adversary class and judge each adversary.

    Class A1 and class A2 adversaries see separately generated transcripts,
    so A1 adversaries never receive key material.
    """
    verdicts = []
    run = 0
    for spec in specs:
        for cls in ("A1", "A2"):
            names = adversaries.get(cls, ())
            if not names:
                continue
            table = ADVERSARIES_A1 if cls == "A1" else ADVERSARIES_A2
            game_seed = None if seed is None else seed + run
            run += 1
            results, _ = run_game(make_net(), spec, trials, {n: table[n] for n in names},
                                  seed=game_seed, adversary_class_=cls)
            verdicts.extend(Verdict(r, expectation_for(spec.game, r.adversary)) for r in results.values())
    return verdicts
