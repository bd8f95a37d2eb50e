"""Play the two unlinkability games at a small trial count.

The honest relay H sits in the middle of the path. Class A1 adversaries
only see frames on H's outgoing link; class A2 adversaries also hold the
keys of the corrupted relays. The source-session game is expected to be
lost to A2: a corrupted relay after H sees which source's key a packet
used. Run ``ariadne games`` for the full 5000-trial version.
"""
from ariadne.simnet.games import (
    ADVERSARIES_A1,
    ADVERSARIES_A2,
    DEFAULT_PATH,
    default_game_network,
    default_specs,
    equality_profile,
    run_game,
)

TRIALS = 300
for game, spec in default_specs().items():
    for cls, advs in (("A1", ADVERSARIES_A1), ("A2", ADVERSARIES_A2)):
        results, _ = run_game(default_game_network(5), spec, TRIALS, advs, seed=1, adversary_class_=cls)
        for r in results.values():
            print(f"{game:15s} {cls} {r.adversary:19s} accuracy={r.accuracy:.3f} "
                  f"advantage={r.advantage:.3f} (3 sigma = {3 * r.stderr:.3f})")

prof = equality_profile(default_game_network(6), "S", DEFAULT_PATH, "H", 500)
print(f"byte equality between consecutive packets: vector+payload {prof.body_rate:.5f} "
      f"(1/256 = {1 / 256:.5f}), pointer {prof.pointer_rate:.3f} (1/5 slots)")
