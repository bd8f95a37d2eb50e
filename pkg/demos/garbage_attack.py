"""A corrupted relay flips one bit; the next relay drops the packet.

Each layer's MAC covers the whole vector and payload, so tampered packets
never reach the destination where the change could be used as a marker.
"""
from ariadne.simnet import SimNetwork, run_path

net = SimNetwork(seed=3)
net.add_nodes(["S", "A", "B", "C", "D"])
session = net.setup_path("S", ["A", "B", "C", "D"])


def flip_on_link_into(target_hop):
    def tamper(index, hop, frame):
        if hop != target_hop:
            return frame
        b = bytearray(frame)
        b[300 + index] ^= 0x01      # somewhere in the payload
        return bytes(b)
    return tamper


for target in range(4):
    report = run_path(net, session, [b"payload"] * 3, tamper=flip_on_link_into(target))
    outcomes = {(net.name_of(p.dropped.address), p.dropped.reason) for p in report.packets if p.dropped}
    print(f"bit flipped before hop {target + 1}: dropped at {sorted(outcomes)}")
