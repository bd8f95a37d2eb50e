"""JSON run and game configuration.

A config is one JSON object::

    {
      "seed": 7,                      # optional; ARIADNE_SEED overrides it
      "l_pmax": 5, "window": 32, "pattern": "a1d4e5",
      "nodes": ["S", "R1", "R2", "D"],
      "links": [["S", "R1"], ...],    # optional, default is a full mesh
      "corrupted": ["R2"],
      "paths": [
        {"source": "S", "hops": ["R1", "R2", "D"], "setup": true,
         "payloads": 100, "payload_size": 64}
      ],
      "games": {
        "trials": 5000, "honest": "H",
        "path_session": {"source": "S", "path": [...], "alt_path": [...]},
        "source_session": {"source": "S", "alt_source": "S2", "path": [...]},
        "adversaries": {"A1": ["null", ...], "A2": ["key-reuse", ...]}
      }
    }
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..deployment import DEFAULT_PATTERN, DEFAULT_WINDOW, Deployment
from ..errors import AriadneError
from .games import (
    ADVERSARIES_A1,
    ADVERSARIES_A2,
    GameSpec,
    path_session_spec,
    source_session_spec,
)
from .network import SimNetwork

SEED_ENV = "ARIADNE_SEED"


class ConfigError(AriadneError, ValueError):
    pass


@dataclass(frozen=True)
class PathConfig:
    source: str
    hops: tuple[str, ...]
    setup: bool = True
    payloads: int = 100
    payload_size: int = 64


@dataclass(frozen=True)
class GamesConfig:
    trials: int
    specs: tuple[GameSpec, ...]
    adversaries: dict[str, tuple[str, ...]]
    window: int = 4


@dataclass
class RunConfig:
    nodes: tuple[str, ...]
    seed: int | None = None
    l_pmax: int = 5
    window: int = DEFAULT_WINDOW
    pattern: bytes = DEFAULT_PATTERN
    links: tuple[tuple[str, str], ...] | None = None
    corrupted: tuple[str, ...] = ()
    paths: tuple[PathConfig, ...] = ()
    games: GamesConfig | None = None
    source: str = field(default="<dict>", compare=False)

    def build_network(self, window: int | None = None) -> SimNetwork:
        net = SimNetwork(self.seed, deployment=Deployment(self.l_pmax), pattern=self.pattern,
                         window=self.window if window is None else window, links=self.links)
        net.add_nodes(self.nodes)
        net.corrupt(*self.corrupted)
        return net


def _require(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise ConfigError(f"{where}: missing {key!r}")
    val = obj[key]
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise ConfigError(f"{where}: {key!r} has the wrong type")
    return val


def _names(seq, known: set[str], where: str) -> tuple[str, ...]:
    if not isinstance(seq, list) or not all(isinstance(x, str) for x in seq):
        raise ConfigError(f"{where}: expected a list of node names")
    unknown = [x for x in seq if x not in known]
    if unknown:
        raise ConfigError(f"{where}: unknown nodes {unknown}")
    return tuple(seq)


def parse_config(raw: dict, source: str = "<dict>") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    nodes = tuple(_require(raw, "nodes", list, source))
    if not nodes or not all(isinstance(n, str) for n in nodes) or len(set(nodes)) != len(nodes):
        raise ConfigError(f"{source}: 'nodes' must be distinct names")
    known = set(nodes)

    seed = raw.get("seed")
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    if seed is not None and not isinstance(seed, int):
        raise ConfigError(f"{source}: 'seed' must be an integer")

    try:
        pattern = bytes.fromhex(raw.get("pattern", DEFAULT_PATTERN.hex()))
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: 'pattern' must be hex") from None
    if len(pattern) != 3:
        raise ConfigError(f"{source}: 'pattern' must be 3 bytes")
    l_pmax = raw.get("l_pmax", 5)
    window = raw.get("window", DEFAULT_WINDOW)
    if not isinstance(l_pmax, int) or not 1 <= l_pmax <= 255:
        raise ConfigError(f"{source}: 'l_pmax' must be an integer in [1, 255]")
    if not isinstance(window, int) or not 1 <= window <= 1024:
        raise ConfigError(f"{source}: 'window' must be an integer in [1, 1024]")

    links = None
    if "links" in raw:
        links = []
        for pair in raw["links"]:
            links.append(_names(pair, known, f"{source}: links"))
            if len(links[-1]) != 2:
                raise ConfigError(f"{source}: each link joins two nodes")
        links = tuple(links)
    corrupted = _names(raw.get("corrupted", []), known, f"{source}: corrupted")

    paths = []
    for i, p in enumerate(raw.get("paths", [])):
        where = f"{source}: paths[{i}]"
        if not isinstance(p, dict):
            raise ConfigError(f"{where}: expected an object")
        src = _require(p, "source", str, where)
        if src not in known:
            raise ConfigError(f"{where}: unknown source {src!r}")
        hops = _names(_require(p, "hops", list, where), known, where)
        if not hops:
            raise ConfigError(f"{where}: empty path")
        payloads = p.get("payloads", 100)
        size = p.get("payload_size", 64)
        if not isinstance(payloads, int) or payloads < 0 or not isinstance(size, int) or size < 0:
            raise ConfigError(f"{where}: payload counts must be non-negative integers")
        paths.append(PathConfig(src, hops, bool(p.get("setup", True)), payloads, size))

    games = _parse_games(raw["games"], known, corrupted, source) if "games" in raw else None
    return RunConfig(nodes, seed, l_pmax, window, pattern, links, corrupted, tuple(paths), games, source)


def _parse_games(g: dict, known: set[str], corrupted, source: str) -> GamesConfig:
    where = f"{source}: games"
    if not isinstance(g, dict):
        raise ConfigError(f"{where}: expected an object")
    trials = g.get("trials", 5000)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"{where}: 'trials' must be a positive integer")
    honest = _require(g, "honest", str, where)
    if honest not in known:
        raise ConfigError(f"{where}: unknown honest node {honest!r}")
    if honest in corrupted:
        raise ConfigError(f"{where}: honest node {honest!r} is also corrupted")
    specs = []
    if "path_session" in g:
        ps = g["path_session"]
        specs.append(path_session_spec(
            honest, _require(ps, "source", str, where),
            _names(_require(ps, "path", list, where), known, where),
            _names(_require(ps, "alt_path", list, where), known, where),
        ))
    if "source_session" in g:
        ss = g["source_session"]
        specs.append(source_session_spec(
            honest, _require(ss, "source", str, where), _require(ss, "alt_source", str, where),
            _names(_require(ss, "path", list, where), known, where),
        ))
    if not specs:
        raise ConfigError(f"{where}: configure path_session and/or source_session")
    advs = g.get("adversaries", {"A1": list(ADVERSARIES_A1), "A2": list(ADVERSARIES_A2)})
    out = {}
    for cls, table in (("A1", ADVERSARIES_A1), ("A2", ADVERSARIES_A2)):
        names = advs.get(cls, [])
        bad = [n for n in names if n not in table]
        if bad:
            raise ConfigError(f"{where}: unknown {cls} adversaries {bad}")
        out[cls] = tuple(names)
    window = g.get("window", 4)
    if not isinstance(window, int) or not 2 <= window <= 1024:
        raise ConfigError(f"{where}: 'window' must be an integer in [2, 1024]")
    return GamesConfig(trials, tuple(specs), out, window)


def load_config(path) -> RunConfig:
    """Load a config file, or a bundled one by bare name (``linear5``)."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        bundled = resources.files("ariadne") / "configs" / f"{path}.json"
        if bundled.is_file():
            return parse_config(json.loads(bundled.read_text()), str(path))
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(raw, str(path))


def bundled_configs() -> list[str]:
    root = resources.files("ariadne") / "configs"
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".json"))
