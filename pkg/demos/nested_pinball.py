"""Two mobile routers, one inside the other, and the cost of nesting."""

from nemo_roam import Simulation, load_canned
from nemo_roam.metrics import DATA_KINDS

sim = Simulation(load_canned("fig3-nested"))
records, report = sim.run()
names = {i: n for n, i in sim.ids_by_name.items()}

# %% MR2 takes its CoA from MR1's prefix, so reaching it means reaching MR1 first
for mr, coa in sim.topology.coas.items():
    print(names[mr], "CoA", coa, "via", names[sim.topology.attachments[mr]])

# %% One CN packet bounces through both home agents
pkt = min(p for p, s in sim.store.packets.items() if s.flow_id == 1)
for r in records:
    if r.pkt_id == pkt and r.kind in DATA_KINDS:
        print(f"{names[r.from_]:>3s} -> {names[r.to]:<3s} " + "#" * r.layers)

# %% Compare with a single level of mobility
_, flat = Simulation(load_canned("fig2-basic")).run()
print("flat stretch  ", flat.flows[1].stretch)
for f in report.flows:
    print(f"nested {f.src}->{f.dst} stretch {f.stretch}, overhead {f.overhead_bytes} B "
          f"for {f.delivered} packets")
