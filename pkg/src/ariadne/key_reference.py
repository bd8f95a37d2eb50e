"""Relay-side matching table from encrypted pattern to temporary keys.

For every session a relay keeps ``W`` live temporary key pairs, indexed by
the 3-byte encryption of the deployment pattern under each pair's
encryption key. A packet names its key only through that ciphertext.

Window policy: a session always holds ``W`` live counters. Consuming a
counter removes it and appends the next unused one, so ``W`` packets may
arrive in any order. Live counters that fall ``W`` or more behind the
newest consumed counter expire (lost packets), which keeps the window
moving after losses.
"""
from __future__ import annotations

import itertools
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import NamedTuple

from .crypto import KeyDeriver, TempKeyPair, encrypt_pattern
from .deployment import DEFAULT_WINDOW, PATTERN_SIZE
from .errors import ReplayError, TableFullError

MAX_WINDOW = 1024
COUNTER_LIMIT = 1 << 64


class Candidate(NamedTuple):
    session_id: int
    t: int
    keys: TempKeyPair


@dataclass
class SessionRecord:
    session_id: int
    deriver: KeyDeriver
    pattern: bytes
    window_size: int
    live: dict  # t -> (prefix, Candidate)
    next_t: int = 0
    newest_consumed: int = -1

    @property
    def window_base(self) -> int:
        return min(self.live, default=self.next_t)


@dataclass(frozen=True)
class TableStats:
    sessions: int
    entries: int
    buckets: int
    colliding_entries: int
    lookups: int
    misses: int
    consumed: int
    replays: int
    expired: int


class PatternTable:
    """Thread-safe for concurrent lookups; consume/register take a lock."""

    def __init__(self, capacity: int = 1 << 20, tombstones: int = 4096):
        self.capacity = capacity
        self._buckets: dict[bytes, list[Candidate]] = {}
        self._sessions: dict[int, SessionRecord] = {}
        self._tombstones: OrderedDict[bytes, tuple[int, int]] = OrderedDict()
        self._tombstone_cap = tombstones
        self._ids = itertools.count()
        self._lock = threading.Lock()
        self._entries = 0
        self._lookups = 0
        self._misses = 0
        self._consumed = 0
        self._replays = 0
        self._expired = 0

    def __len__(self) -> int:
        return self._entries

    # -- internal helpers, caller holds the lock -------------------------

    def _insert(self, rec: SessionRecord, t: int) -> None:
        keys = rec.deriver.derive(t)
        prefix = encrypt_pattern(keys.enc, rec.pattern)
        cand = Candidate(rec.session_id, t, keys)
        self._buckets.setdefault(prefix, []).append(cand)
        rec.live[t] = (prefix, cand)
        self._entries += 1

    def _remove(self, rec: SessionRecord, t: int) -> bytes:
        prefix, cand = rec.live.pop(t)
        bucket = self._buckets[prefix]
        bucket.remove(cand)
        if not bucket:
            del self._buckets[prefix]
        self._entries -= 1
        return prefix

    def _refill(self, rec: SessionRecord) -> None:
        while len(rec.live) < rec.window_size and rec.next_t < COUNTER_LIMIT:
            self._insert(rec, rec.next_t)
            rec.next_t += 1

    # -- public API -------------------------------------------------------

    def register_session(self, master_key: bytes, pattern: bytes, window: int = DEFAULT_WINDOW,
                         start: int = 0) -> int:
        """Add a session whose live window is ``start .. start + window - 1``."""
        if not 0 <= start < COUNTER_LIMIT:
            raise ValueError("start counter must fit in 64 bits")
        if not 1 <= window <= MAX_WINDOW:
            raise ValueError(f"window must be within [1, {MAX_WINDOW}]")
        if len(pattern) != PATTERN_SIZE:
            raise ValueError("pattern must be 3 bytes")
        deriver = KeyDeriver(master_key)
        with self._lock:
            if self._entries + window > self.capacity:
                raise TableFullError(f"table capacity {self.capacity} exceeded")
            sid = next(self._ids)
            rec = SessionRecord(sid, deriver, pattern, window, {}, next_t=start)
            self._sessions[sid] = rec
            self._refill(rec)
        return sid

    def unregister_session(self, session_id: int) -> None:
        with self._lock:
            rec = self._sessions.pop(session_id)
            for t in list(rec.live):
                self._remove(rec, t)

    def session(self, session_id: int) -> SessionRecord:
        return self._sessions[session_id]

    def sessions(self) -> list[int]:
        return list(self._sessions)

    def lookup(self, prefix: bytes) -> list[Candidate]:
        self._lookups += 1
        bucket = self._buckets.get(prefix)
        if not bucket:
            self._misses += 1
            return []
        return list(bucket)

    def consume(self, session_id: int, t: int) -> None:
        """Atomically retire ``(session_id, t)`` and slide the window."""
        with self._lock:
            rec = self._sessions.get(session_id)
            if rec is None or t not in rec.live:
                self._replays += 1
                raise ReplayError(f"session {session_id} counter {t} is not live")
            prefix = self._remove(rec, t)
            self._tombstones[prefix] = (session_id, t)
            if len(self._tombstones) > self._tombstone_cap:
                self._tombstones.popitem(last=False)
            self._consumed += 1
            if t > rec.newest_consumed:
                rec.newest_consumed = t
                # live is in ascending t order (insertion order)
                limit = t - rec.window_size
                stale = []
                for u in rec.live:
                    if u > limit:
                        break
                    stale.append(u)
                for u in stale:
                    self._remove(rec, u)
                self._expired += len(stale)
            self._refill(rec)

    def recently_consumed(self, prefix: bytes) -> bool:
        """True when ``prefix`` named a key pair that was consumed recently."""
        return prefix in self._tombstones

    def stats(self) -> TableStats:
        return TableStats(
            sessions=len(self._sessions),
            entries=self._entries,
            buckets=len(self._buckets),
            colliding_entries=self._entries - len(self._buckets),
            lookups=self._lookups,
            misses=self._misses,
            consumed=self._consumed,
            replays=self._replays,
            expired=self._expired,
        )
