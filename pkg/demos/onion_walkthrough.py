"""Follow one data packet across a three-relay path.

Every relay finds its key through the 3-byte encrypted pattern in the slot
the pointer names, checks the MAC, rewrites that slot and strips one
keystream layer. Nothing in the bytes repeats from hop to hop.
"""
import random

from ariadne import DEFAULT_PATTERN, Forward, Hop, NodeContext, PatternTable, create_packet, process_packet

rng = random.Random(7)
names = ["alpha", "bravo", "charlie"]
hops = [Hop(bytes([0xFD, i]) + rng.randbytes(14), rng.randbytes(32)) for i in range(3)]
nodes = {}
for name, hop in zip(names, hops):
    table = PatternTable()
    table.register_session(hop.master_key, DEFAULT_PATTERN, window=8)
    nodes[hop.address] = (name, NodeContext(hop.address, table, rng=rng))

addr, header, body = create_packet(hops, t=0, pattern=DEFAULT_PATTERN, payload=b"hello, onion", rng=rng)
print(f"source sends to {nodes[addr][0]}")
while True:
    name, ctx = nodes[addr]
    vec = body.routing_vector
    print(f"  {name:8s} pointer={header.pointer}  slots="
          + " ".join(vec[i * 36:i * 36 + 3].hex() for i in range(5)))
    out = process_packet(ctx, header, body)
    if not isinstance(out, Forward):
        break
    print(f"  {name:8s} -> {nodes[out.next_addr][0]}")
    addr, header, body = out.next_addr, out.header, out.body
print(f"delivered at {name}: {out.payload!r} (counter t={out.t})")
