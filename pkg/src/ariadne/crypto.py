"""Symmetric primitives and the X25519 group used by Ariadne.

One fixed suite:

* temporary keys: HKDF-SHA256 over the 32-byte master key; the expansion
  info is ``b"ariadne-enc"`` or ``b"ariadne-mac"`` followed by the 8-byte
  big-endian packet counter,
* keystream: BLAKE3 in keyed XOF mode, so a shorter stream is always a
  prefix of a longer one,
* MAC: keyed BLAKE3 truncated to 16 bytes,
* group: X25519. Exponentiation ``elem ** s`` is ``X25519(s, elem)``; the
  scalar is clamped by the curve function itself.
"""
from __future__ import annotations

import hashlib
import hmac
import os
import random
import threading
from typing import NamedTuple

import blake3
import numpy as np
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)

from .deployment import GROUP_ELEMENT_SIZE, MAC_SIZE, PATTERN_SIZE
from .errors import InvalidGroupElementError

KEY_SIZE = 32
SCALAR_SIZE = 32
KEYSTREAM_CAP = 1 << 20

ENC_LABEL = b"ariadne-enc"
MAC_LABEL = b"ariadne-mac"
BLIND_LABEL = b"ariadne-blind"

_HKDF_SALT = bytes(hashlib.sha256().digest_size)
_BLOCK_ONE = b"\x01"
_IPAD = bytes(x ^ 0x36 for x in range(256))
_OPAD = bytes(x ^ 0x5C for x in range(256))

_system_rng = random.SystemRandom()
_POOL_SIZE = 4096


class _UrandomPool(threading.local):
    """Per-thread buffer of OS randomness for the many tiny per-hop draws."""

    def __init__(self):
        self.buf = b""
        self.pos = 0

    def take(self, n: int) -> bytes:
        pos = self.pos
        if pos + n > len(self.buf):
            self.buf = os.urandom(_POOL_SIZE)
            pos = 0
        self.pos = pos + n
        return self.buf[pos:pos + n]


_pool = _UrandomPool()


def default_rng(rng: random.Random | None) -> random.Random:
    return _system_rng if rng is None else rng


def random_bytes(rng: random.Random | None, n: int) -> bytes:
    """``n`` random bytes from ``rng``, or from the OS when ``rng`` is None."""
    if rng is None:
        return _pool.take(n) if n <= 256 else os.urandom(n)
    return rng.randbytes(n)


def _check_key(key: bytes, name: str = "key") -> None:
    if len(key) != KEY_SIZE:
        raise ValueError(f"{name} must be {KEY_SIZE} bytes, got {len(key)}")


# ---------------------------------------------------------------------------
# temporary key derivation

class TempKeyPair(NamedTuple):
    enc: bytes
    mac: bytes
    t: int


class KeyDeriver:
    """HKDF bound to one master key.

    The extract step runs once. The HMAC-SHA256 inner and outer pad states
    for the pseudo-random key are kept, so each ``derive(t)`` costs four
    short hash compressions instead of rebuilding two HMAC objects.
    """

    __slots__ = ("_inner", "_outer")

    def __init__(self, master_key: bytes):
        _check_key(master_key, "master key")
        prk = hmac.digest(_HKDF_SALT, master_key, "sha256")
        block = prk.ljust(hashlib.sha256().block_size, b"\x00")
        self._inner = hashlib.sha256(block.translate(_IPAD))
        self._outer = hashlib.sha256(block.translate(_OPAD))

    def _expand(self, info: bytes) -> bytes:
        inner = self._inner.copy()
        inner.update(info)
        outer = self._outer.copy()
        outer.update(inner.digest())
        return outer.digest()

    def derive(self, t: int) -> TempKeyPair:
        if not 0 <= t < 1 << 64:
            raise ValueError("packet counter must fit in 64 bits")
        counter = t.to_bytes(8, "big") + _BLOCK_ONE
        return TempKeyPair(self._expand(ENC_LABEL + counter), self._expand(MAC_LABEL + counter), t)


def derive_temp_keys(master_key: bytes, t: int) -> TempKeyPair:
    return KeyDeriver(master_key).derive(t)


# ---------------------------------------------------------------------------
# keystream, MAC, XOR

def keystream(enc_key: bytes, length: int) -> bytes:
    if not 0 <= length <= KEYSTREAM_CAP:
        raise ValueError(f"keystream length {length} outside [0, {KEYSTREAM_CAP}]")
    return blake3.blake3(key=enc_key).digest(length)


def xor_bytes(a: bytes, b: bytes) -> bytes:
    n = len(a)
    if len(b) != n:
        raise ValueError("xor operands differ in length")
    if n > 128:
        return (np.frombuffer(a, np.uint8) ^ np.frombuffer(b, np.uint8)).tobytes()
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(n, "little")


def mac(mac_key: bytes, msg: bytes) -> bytes:
    return blake3.blake3(msg, key=mac_key).digest(MAC_SIZE)


def verify_mac(mac_key: bytes, msg: bytes, tag: bytes) -> bool:
    return hmac.compare_digest(mac(mac_key, msg), tag)


def encrypt_pattern(enc_key: bytes, pattern: bytes) -> bytes:
    if len(pattern) != PATTERN_SIZE:
        raise ValueError(f"pattern must be {PATTERN_SIZE} bytes")
    ks = blake3.blake3(key=enc_key).digest(PATTERN_SIZE)
    return (int.from_bytes(pattern, "little") ^ int.from_bytes(ks, "little")).to_bytes(PATTERN_SIZE, "little")


# ---------------------------------------------------------------------------
# X25519 group

BASE_POINT = (9).to_bytes(GROUP_ELEMENT_SIZE, "little")


def _exp(elem: bytes, scalar: bytes) -> bytes:
    if len(elem) != GROUP_ELEMENT_SIZE:
        raise InvalidGroupElementError(f"group element must be {GROUP_ELEMENT_SIZE} bytes")
    if len(scalar) != SCALAR_SIZE:
        raise ValueError(f"scalar must be {SCALAR_SIZE} bytes")
    try:
        return X25519PrivateKey.from_private_bytes(scalar).exchange(
            X25519PublicKey.from_public_bytes(elem)
        )
    except ValueError as exc:
        # raised for low-order points (all-zero shared value)
        raise InvalidGroupElementError(str(exc)) from exc


def dh_keygen(rng: random.Random | None = None) -> tuple[bytes, bytes]:
    """Return ``(x, g**x)``."""
    x = random_bytes(rng, SCALAR_SIZE)
    y = X25519PrivateKey.from_private_bytes(x).public_key().public_bytes_raw()
    return x, y


def dh_shared(elem: bytes, x: bytes) -> bytes:
    """``elem ** x``, used directly as a 32-byte master key."""
    return _exp(elem, x)


def blind_factor(alpha: bytes, master_key: bytes) -> bytes:
    return hashlib.sha256(BLIND_LABEL + alpha + master_key).digest()


def blind(alpha: bytes, b: bytes) -> bytes:
    return _exp(alpha, b)


def exp_chain(elem: bytes, scalars) -> bytes:
    """Raise ``elem`` to every scalar in turn."""
    for s in scalars:
        elem = _exp(elem, s)
    return elem
