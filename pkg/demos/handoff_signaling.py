"""What a handoff costs, and who loses packets while it happens."""

from collections import Counter

from nemo_roam import Simulation, load_canned
from nemo_roam import metrics as m

spec = load_canned("fig5-handoff")

# %% Signaling in the window after the move, for both modes
for mode in ("bs", "ro"):
    sim = Simulation(spec.with_mode(mode))
    sim.run()
    for window in m.attach_windows(sim.store):
        counts = m.signaling_breakdown(sim.store, window)
        print(mode, dict(sorted(counts.items())), "total", sum(counts.values()))

# %% Route optimised run in detail
sim = Simulation(spec)
records, report = sim.run()
names = {i: n for n, i in sim.ids_by_name.items()}

# %% CN binding updates go out at the attach instant; each BA marks the CN switched
mr = sim.ids_by_name["MR"]
for r in records:
    if r.time_ms < 5000:
        continue
    if r.kind == m.BU_CN and r.from_ == mr:
        print(f"t={r.time_ms}  BU_CN leaves MR")
    elif r.kind == m.BA_CN and names[r.from_].startswith("CN"):
        print(f"t={r.time_ms}  {names[r.from_]} now sends to the new CoA")

# %% The packets that were already heading for the old care-of address
for r in records:
    if r.kind == m.DROP:
        flow = sim.store.packets[r.pkt_id].flow_id
        src = sim.flows[flow][2].src
        print(f"t={r.time_ms}  lost packet from {src} at {names[r.to]} ({r.drop_reason})")

# %% Delivery per correspondent
delivered = Counter(sim.flows[sim.store.packets[r.pkt_id].flow_id][2].src
                    for r in records if r.kind == m.DELIVER)
print(dict(sorted(delivered.items())))
print("signaling per handoff:", report.signaling_msgs_per_handoff)
