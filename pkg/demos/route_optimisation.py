"""A new correspondent, from first packet to direct path."""

from nemo_roam import Simulation, load_canned
from nemo_roam.metrics import milestones

sim = Simulation(load_canned("fig4-case1"))
records, report = sim.run()
names = {i: n for n, i in sim.ids_by_name.items()}

# %% The handshake, one step per line
for step in milestones(records, set(sim.has)):
    print(step)

# %% Timeline of the control messages
for r in records:
    if r.kind in ("RO_AUTH_REQ", "RO_AUTH_ACK", "BU_CN", "BA_CN", "RO_ACTIVE"):
        print(f"t={r.time_ms:5d}  {r.kind:12s} {names[r.from_]:>3s} -> {names[r.to]}")

# %% What the MR and the CN remember afterwards
mr = sim.ids_by_name["MR"]
for cn, entry in sim.registries[mr].entries.items():
    print("MR registry:", cn, entry.state.value, sorted(str(a) for a in entry.mnns))
cn = sim.cns[sim.ids_by_name["CN"]]
for mnn, row in cn.table.entries.items():
    print("CN table:   ", mnn, "->", row.mr_coa, "seq", row.seq)

# %% The MNN's reply never touches the HA
ha = sim.ids_by_name["HA"]
reply = max(sim.store.packets)
path = [names[r.from_] for r in records if r.pkt_id == reply and r.kind in ("DATA", "DIRECT_DATA")]
print(" -> ".join(path + ["CN"]), "| via HA:", any(names[ha] == p for p in path))

# %% Same topology, steady state, both modes side by side
for mode in ("bs", "ro"):
    _, rep = Simulation(load_canned("fig2-basic").with_mode(mode)).run()
    steady = rep.flows[1]
    print(f"{mode}: traversals={steady.traversals} stretch={steady.stretch} ha_share={steady.ha_share}")
