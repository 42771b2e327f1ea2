"""Basic Support on the flat network: where the packets actually go."""

from nemo_roam import Simulation, load_canned
from nemo_roam.metrics import DATA_KINDS

# %% Load the flat scenario and look at its nodes
spec = load_canned("fig2-basic")
for node in spec.nodes:
    print(f"{node.name:4s} {node.kind:7s} {node.prefix or ''}")

# %% Run it
sim = Simulation(spec)
records, report = sim.run()
names = {i: n for n, i in sim.ids_by_name.items()}

# %% The MR registers first: one BU up to the HA and one BA back
for r in records[:12]:
    if r.kind in ("ATTACH", "BU", "BA"):
        print(r.time_ms, r.kind, names[r.from_], "->", names[r.to])

# %% Follow a single CN packet. The layer count shows where the tunnel is.
pkt = min(sim.store.packets)
for r in records:
    if r.pkt_id == pkt and r.kind in DATA_KINDS:
        print(f"t={r.time_ms:5d}  {names[r.from_]:>3s} -> {names[r.to]:<3s}  headers={r.layers}")

# %% Six hops where four would do
for f in report.flows:
    print(f"flow {f.flow_id}: traversals={f.traversals} shortest={f.shortest_possible} "
          f"stretch={f.stretch} overhead={f.overhead_bytes} B")
