"""``ariadne`` command line: run, bench, games, vectors.

Exit codes: 0 success, 1 a run or bound failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import bench, vectors
from .crypto import random_bytes
from .errors import AriadneError, PathTooLongError
from .simnet.config import SEED_ENV, ConfigError, bundled_configs, load_config
from .simnet.games import LIMITATION, WITHIN, play_all
from .simnet.network import run_path

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _hops(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out or any(not 1 <= h <= 5 for h in out):
        raise argparse.ArgumentTypeError("hops must lie in 1..5, e.g. 1-5 or 2,5")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="only print summaries and failures")
    p = _Parser(prog="ariadne", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", parents=[common], help="set up paths and send data over a configured topology")
    r.add_argument("config", help=f"JSON config file or bundled name ({', '.join(bundled_configs())})")
    r.add_argument("--transcript", help="write taps and traces as JSON lines")

    b = sub.add_parser("bench", parents=[common], help="creation/processing latency per hop count")
    b.add_argument("--kind", choices=[*bench.KINDS, "all"], default="all")
    b.add_argument("--role", choices=[*bench.ROLES, "all"], default="all")
    b.add_argument("--hops", type=_hops, default=list(range(1, 6)))
    b.add_argument("--duration", type=float, default=2.0, help="timed seconds per cell (target)")
    b.add_argument("--warmup", type=float, default=3.0, help="warmup seconds per cell")
    b.add_argument("--samples", type=int, default=bench.SAMPLES)
    b.add_argument("--output", help="also write the records to this file")

    g = sub.add_parser("games", parents=[common], help="play the unlinkability games from a config")
    g.add_argument("config", nargs="?", default="games")
    g.add_argument("--trials", type=int, help="override the configured trial count")
    g.add_argument("--json", action="store_true", help="one JSON record per result")

    v = sub.add_parser("vectors", parents=[common], help="print golden crypto test vectors")
    v.add_argument("--check", metavar="FILE", help="verify a vector file instead of printing")
    return p


# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if not cfg.paths:
        raise ConfigError(f"{args.config}: no paths to run")
    net = cfg.build_network()
    net.tap_all()
    failures = 0
    for pc in cfg.paths:
        session = net.setup_path(pc.source, pc.hops) if pc.setup else net.provision(pc.source, pc.hops)
        payloads = [random_bytes(net.rng, pc.payload_size) for _ in range(pc.payloads)]
        report = run_path(net, session, payloads)
        route = " -> ".join([pc.source, *pc.hops])
        for pkt, sent in zip(report.packets, payloads):
            ok = pkt.delivered == sent
            failures += not ok
            if not args.quiet or not ok:
                steps = " ".join(
                    f"{net.name_of(h.address)}:{h.outcome}" + (f"({h.reason})" if h.reason else "")
                    for h in pkt.hops
                )
                print(f"t={pkt.t:<4d} {'ok ' if ok else 'BAD'} {steps}")
        delivered = sum(p.delivered == s for p, s in zip(report.packets, payloads))
        print(f"path {route}: {'setup' if pc.setup else 'provisioned'}, "
              f"{delivered}/{len(payloads)} payloads delivered")
    if args.transcript:
        n = net.export_transcript(args.transcript)
        print(f"transcript: {n} records -> {args.transcript}")
    return EXIT_OK if failures == 0 else EXIT_FAIL


def cmd_bench(args) -> int:
    if args.samples < 1 or args.duration <= 0 or args.warmup < 0:
        raise UsageError("samples and duration must be positive, warmup non-negative")
    kinds = bench.KINDS if args.kind == "all" else (args.kind,)
    roles = bench.ROLES if args.role == "all" else (args.role,)
    seed = os.environ.get(SEED_ENV)
    cells = []
    for k in kinds:
        for r in roles:
            for h in args.hops:
                cell = bench.measure(k, r, h, duration=args.duration, warmup=args.warmup,
                                     samples=args.samples, seed=int(seed) if seed else None)
                print(cell.to_record(), flush=True)
                cells.append(cell)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(bench.BenchReport(cells).to_text())
    return EXIT_OK


def cmd_games(args) -> int:
    cfg = load_config(args.config)
    if cfg.games is None:
        raise ConfigError(f"{args.config}: no 'games' section")
    trials = cfg.games.trials if args.trials is None else args.trials
    if trials < 1:
        raise UsageError("trials must be a positive integer")
    start = time.monotonic()
    verdicts = play_all(lambda: cfg.build_network(window=cfg.games.window), cfg.games.specs,
                        cfg.games.adversaries, trials, cfg.seed)
    bad = 0
    for v in verdicts:
        r = v.result
        bad += not v.passed
        if args.json:
            print(json.dumps({**r.as_dict(), "expectation": v.expectation, "passed": v.passed}))
            continue
        if v.expectation == WITHIN:
            note = "ok" if v.passed else "VIOLATION (above 3 sigma)"
        elif v.expectation == LIMITATION:
            note = "expected limitation" if v.passed else "VIOLATION (limitation not reproduced)"
        else:
            note = "informational"
        print(f"{r.game:<15} {r.adversary_class} {r.adversary:<19} acc={r.accuracy:.4f} "
              f"adv={r.advantage:.4f} ±{3 * r.stderr:.4f} (3σ, n={r.trials})  {note}")
    if not args.quiet and not args.json:
        print(f"{len(verdicts)} results, {bad} violations, {time.monotonic() - start:.1f}s")
    return EXIT_OK if bad == 0 else EXIT_FAIL


def cmd_vectors(args) -> int:
    if args.check:
        with open(args.check, encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
        bad = [ln for ln in lines if not vectors.check(ln)]
        for ln in bad:
            print("MISMATCH", ln[:80])
        print(f"{len(lines) - len(bad)}/{len(lines)} vectors match")
        return EXIT_OK if not bad else EXIT_FAIL
    for line in vectors.generate():
        print(line)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "games": cmd_games, "vectors": cmd_vectors}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ariadne: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, PathTooLongError) as exc:
        print(f"ariadne: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AriadneError, ValueError) as exc:
        print(f"ariadne: failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
