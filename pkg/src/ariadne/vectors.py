"""Golden test vectors for the crypto suite.

One vector per line, ``<op> <inputs...> → <outputs...>``, all hex except
integer counters and lengths. Inputs come from SHA-256 of a label so the
file is reproducible without any randomness.
"""
from __future__ import annotations

import hashlib

from . import crypto
from .deployment import DEFAULT_PATTERN

ARROW = "→"


def _seed_bytes(label: str, n: int = 32) -> bytes:
    if n == 0:
        return b""
    out = b""
    i = 0
    while len(out) < n:
        out += hashlib.sha256(f"{label}/{i}".encode()).digest()
        i += 1
    return out[:n]


def compute(op: str, args: list[str]) -> list[str]:
    """Outputs of ``op`` on textual ``args``, as written in a vector line."""
    h = bytes.fromhex
    if op == "kdf":
        keys = crypto.derive_temp_keys(h(args[0]), int(args[1]))
        return [keys.enc.hex(), keys.mac.hex()]
    if op == "keystream":
        return [crypto.keystream(h(args[0]), int(args[1])).hex()]
    if op == "mac":
        return [crypto.mac(h(args[0]), h(args[1])).hex()]
    if op == "pattern":
        return [crypto.encrypt_pattern(h(args[0]), h(args[1])).hex()]
    if op == "x25519":
        return [crypto.dh_shared(h(args[1]), h(args[0])).hex()]
    if op == "x25519_base":
        return [crypto.exp_chain(crypto.BASE_POINT, [h(args[0])]).hex()]
    if op == "blind_factor":
        return [crypto.blind_factor(h(args[0]), h(args[1])).hex()]
    raise ValueError(f"unknown vector op {op!r}")


def _line(op: str, args: list[str]) -> str:
    outs = [o or "-" for o in compute(op, args)]
    return f"{op} {' '.join(a or '-' for a in args)} {ARROW} {' '.join(outs)}"


def generate() -> list[str]:
    lines = []
    for i, t in enumerate((0, 1, 2, 255, 256, 2**32, 2**64 - 1)):
        lines.append(_line("kdf", [_seed_bytes(f"kdf{i}").hex(), str(t)]))
    for i, n in enumerate((0, 1, 3, 36, 64, 216, 1488)):
        lines.append(_line("keystream", [_seed_bytes(f"ks{i}").hex(), str(n)]))
    for i, n in enumerate((0, 1, 64, 1452)):
        lines.append(_line("mac", [_seed_bytes(f"mk{i}").hex(), _seed_bytes(f"msg{i}", n).hex()]))
    for i in range(4):
        lines.append(_line("pattern", [_seed_bytes(f"pk{i}").hex(), DEFAULT_PATTERN.hex()]))
    for i in range(4):
        lines.append(_line("x25519_base", [_seed_bytes(f"xs{i}").hex()]))
        elem = crypto.exp_chain(crypto.BASE_POINT, [_seed_bytes(f"xe{i}")])
        lines.append(_line("x25519", [_seed_bytes(f"xs{i}").hex(), elem.hex()]))
    for i in range(4):
        lines.append(_line("blind_factor", [_seed_bytes(f"ba{i}").hex(), _seed_bytes(f"bk{i}").hex()]))
    return lines


def parse(line: str) -> tuple[str, list[str], list[str]]:
    left, _, right = line.partition(f" {ARROW} ")
    if not right:
        raise ValueError(f"not a vector line: {line!r}")
    op, *args = left.split()
    args = ["" if a == "-" else a for a in args]
    return op, args, ["" if o == "-" else o for o in right.split()]


def check(line: str) -> bool:
    op, args, expected = parse(line)
    return compute(op, args) == expected
