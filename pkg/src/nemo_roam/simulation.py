"""Runs a scenario: builds the topology and per-node protocol state, then
feeds engine events through the Basic Support and route optimisation logic.
"""

from __future__ import annotations

import itertools
import logging
from typing import Dict, List, Optional, Tuple

from . import metrics as m
from . import nemo_bs as bs
from . import route_opt as ro
from .metrics import MetricsReport, MetricsStore, TraceRecord, build_report
from .netmodel import (
    Address,
    Audience,
    BindingAck,
    BindingUpdate,
    Data,
    Datagram,
    RoAuthAck,
    RoAuthRequest,
    decapsulate,
    prefix_contains,
)
from .scenario import AttachDirective, ScenarioSpec, SendDirective
from .simnet import (
    DEFAULT_MAX_EVENTS,
    AttachMr,
    DeliverDatagram,
    Engine,
    InjectTraffic,
    Node,
    NodeKind,
    SetLink,
    Timer,
    Topology,
    Unroutable,
    apply_attach,
    next_hop,
)

log = logging.getLogger(__name__)

_KINDS = {
    "cn": NodeKind.CN,
    "router": NodeKind.ROUTER,
    "ha": NodeKind.HOME_AGENT,
    "ar": NodeKind.ACCESS_ROUTER,
    "mr": NodeKind.MOBILE_ROUTER,
    "mnn": NodeKind.MNN,
}
_AUTO_BASE = 0xFD00 << 112


class Simulation:
    def __init__(self, spec: ScenarioSpec, max_events: int = DEFAULT_MAX_EVENTS):
        self.spec = spec
        self.ro_mode = spec.mode == "ro"
        self.topology = Topology()
        self.engine = Engine(self._handle, max_events)
        self.ids = itertools.count(1)
        self.ids_by_name: Dict[str, int] = {}
        self.addr: Dict[int, Address] = {}
        self.mrs: Dict[int, bs.MrState] = {}
        self.registries: Dict[int, ro.CnRegistry] = {}
        self.has: Dict[int, bs.HaState] = {}
        self.cns: Dict[int, ro.CnState] = {}
        self._build()
        self.ha_addresses = {ha.address for ha in self.has.values()}
        self.store = MetricsStore(self.has)
        self.store.t_end = spec.t_end_ms
        self.flows: Dict[int, Tuple[int, int, SendDirective]] = {}
        self._schedule()

    # setup

    def _build(self) -> None:
        top = self.topology
        for i, n in enumerate(self.spec.nodes, 1):
            self.ids_by_name[n.name] = i
        for i, n in enumerate(self.spec.nodes, 1):
            node = Node(i, n.name, _KINDS[n.kind], prefix=n.prefix,
                        ha=self.ids_by_name.get(n.ha), mr=self.ids_by_name.get(n.mr),
                        parent=self.ids_by_name.get(n.parent))
            if n.addr is not None:
                node.address = n.addr
            elif n.kind == "mnn":
                node.address = self.spec.node(n.mr).prefix.base + 0x1000 + i
            else:
                node.address = Address(_AUTO_BASE | i)
            top.add_node(node)
            self.addr[i] = node.address
        for link in self.spec.links:
            top.add_link(self.ids_by_name[link.a], self.ids_by_name[link.b], link.delay_ms)
        for n in self.spec.nodes:
            i = self.ids_by_name[n.name]
            if n.kind == "ha":
                self.has[i] = bs.HaState(
                    self.addr[i],
                    visiting_traffic_policy=bs.VisitorPolicy(n.visitors or "allow"),
                    ro_denied={self.addr[self.ids_by_name[c]] for c in n.ro_deny},
                )
            elif n.kind == "cn":
                self.cns[i] = ro.CnState(self.addr[i])
        for n in self.spec.nodes:
            if n.kind == "mr":
                i, ha = self.ids_by_name[n.name], self.ids_by_name[n.ha]
                self.mrs[i] = bs.MrState(self.addr[i], self.addr[ha], n.prefix)
                self.registries[i] = ro.CnRegistry()
                self.has[ha].served_prefixes.add(n.prefix)

    def _schedule(self) -> None:
        flow_id = 0
        for d in self.spec.schedule:
            if isinstance(d, AttachDirective):
                self.engine.schedule(d.at_ms, AttachMr(self.ids_by_name[d.mr], self.ids_by_name[d.ar]))
            else:
                flow_id += 1
                src, dst = self.ids_by_name[d.src], self.ids_by_name[d.dst]
                self.flows[flow_id] = (src, dst, d)
                self.store.register_flow(flow_id, d.src, d.dst)
                self.engine.schedule(d.at_ms, InjectTraffic(flow_id, 0))

    def schedule_link_state(self, at_ms: int, a: str, b: str, up: bool) -> None:
        self.engine.schedule(at_ms - self.engine.now, SetLink(self.ids_by_name[a], self.ids_by_name[b], up))

    def run(self, t_end_ms: Optional[int] = None) -> Tuple[List[TraceRecord], MetricsReport]:
        self.engine.run_until(self.spec.t_end_ms if t_end_ms is None else t_end_ms)
        return self.store.records, build_report(self.store)

    # engine callbacks

    def _handle(self, action) -> None:
        if isinstance(action, DeliverDatagram):
            if not self.topology.link_up(action.from_, action.at):
                self._drop(action.at, action.d, action.from_, bs.DropReason.UNROUTABLE)
            else:
                self._receive(action.at, action.d, action.from_)
        elif isinstance(action, AttachMr):
            self._attach(action.mr, action.ar)
        elif isinstance(action, InjectTraffic):
            self._inject(action.flow_id, action.index)
        elif isinstance(action, SetLink):
            self.topology.set_link_state(action.a, action.b, action.up)
        elif isinstance(action, Timer):
            action.callback()
        else:  # pragma: no cover
            raise TypeError(f"unknown engine action {action!r}")

    def _attach(self, mr_id: int, ar_id: int) -> None:
        coa = apply_attach(self.topology, mr_id, ar_id)
        self._record(TraceRecord(self.engine.now, 0, mr_id, ar_id, 0, m.ATTACH))
        mr = self.mrs[mr_id]
        bu = bs.mr_on_attach(mr, coa, next(self.ids))
        self._transmit(mr_id, bu, mr_id)
        self._arm_bu_timer(mr_id, mr.bu_seq)
        if self.ro_mode:
            for d in ro.mr_on_handoff_broadcast(mr, self.registries[mr_id], coa, self.ids):
                self._send_cn_bu(mr_id, d)

    def _arm_bu_timer(self, mr_id: int, seq: int) -> None:
        def fire():
            d = bs.mr_on_bu_timeout(self.mrs[mr_id], seq, self.ids)
            if d is not None:
                self._transmit(mr_id, d, mr_id)
                self._arm_bu_timer(mr_id, seq)
            elif not self.mrs[mr_id].bound and self.mrs[mr_id].pending_bu == seq:
                log.info("t=%d MR %d gave up on binding update %d", self.engine.now, mr_id, seq)
        self.engine.schedule(bs.BU_RETRANSMIT_MS, Timer(fire))

    def _send_cn_bu(self, mr_id: int, d: Datagram) -> None:
        cn, seq = d.outer.dst, d.body.seq
        self._transmit(mr_id, d, mr_id)

        def fire():
            again = ro.mr_on_bu_cn_timeout(self.mrs[mr_id], self.registries[mr_id], cn, seq, self.ids)
            if again is not None:
                self._transmit(mr_id, again, mr_id)
                self.engine.schedule(ro.BU_CN_RETRANSMIT_MS, Timer(fire))
        self.engine.schedule(ro.BU_CN_RETRANSMIT_MS, Timer(fire))

    def _inject(self, flow_id: int, index: int) -> None:
        src, dst, directive = self.flows[flow_id]
        body = Data(flow_id, index, directive.bytes)
        pkt_id = next(self.ids)
        self.store.register_packet(pkt_id, flow_id, directive.bytes)
        if src in self.cns:
            d = ro.cn_send(self.cns[src], self.addr[dst], body, pkt_id)
        else:
            d = Datagram.make(self.addr[src], self.addr[dst], body, pkt_id)
        self._transmit(src, d, src)
        if index + 1 < directive.count:
            self.engine.schedule(directive.interval_ms, InjectTraffic(flow_id, index + 1))

    # forwarding

    def _owns(self, at: int, addr: Address) -> bool:
        if at in self.mrs:
            return bs.mr_owns(self.mrs[at], addr)
        return self.addr[at] == addr

    def _kind(self, d: Datagram) -> str:
        body = d.body
        if isinstance(body, Data):
            if d.layers >= 2 and not {d.outer.src, d.outer.dst} & self.ha_addresses:
                return m.DIRECT_DATA
            return m.DATA
        if isinstance(body, BindingUpdate):
            return m.BU if body.audience is Audience.TO_HOME_AGENT else m.BU_CN
        if isinstance(body, BindingAck):
            return m.BA if d.inner.src in self.ha_addresses else m.BA_CN
        if isinstance(body, RoAuthRequest):
            return m.RO_AUTH_REQ
        return m.RO_AUTH_ACK

    def _record(self, rec: TraceRecord) -> None:
        self.store.record_traversal(rec)

    def _transmit(self, at: int, d: Datagram, prev: int) -> None:
        if self._owns(at, d.outer.dst):
            self._receive(at, d, prev, local=True)
            return
        try:
            nh = next_hop(self.topology, at, d.outer.dst)
        except Unroutable:
            self._drop(at, d, prev, bs.DropReason.UNROUTABLE)
            return
        self._record(TraceRecord(self.engine.now, d.id, at, nh, d.layers, self._kind(d)))
        self.engine.schedule(self.topology.delay(at, nh), DeliverDatagram(nh, d, at))

    def _drop(self, at: int, d: Datagram, prev: int, reason) -> None:
        self._record(TraceRecord(self.engine.now, d.id, prev, at, d.layers, m.DROP, str(reason)))

    def _deliver(self, at: int, d: Datagram, prev: int) -> None:
        self._record(TraceRecord(self.engine.now, d.id, prev, at, d.layers, m.DELIVER))
        if d.id in self.store.packets:
            src, dst, _ = self.flows[d.body.flow_id]
            hops = self.topology.shortest_hops(src, dst)
            if hops is not None:
                self.store.note_shortest(d.id, hops)

    def _apply(self, at: int, action: bs.Action, prev: int) -> None:
        if isinstance(action, bs.Forward):
            self._transmit(at, action.d, prev)
        else:
            self._drop(at, action.d, prev, action.reason)

    def _receive(self, at: int, d: Datagram, prev: int, local: bool = False) -> None:
        kind = self.topology.nodes[at].kind
        if kind is NodeKind.MOBILE_ROUTER:
            self._receive_mr(at, d, prev, local)
        elif kind is NodeKind.HOME_AGENT:
            self._receive_ha(at, d, prev)
        elif kind in (NodeKind.CN, NodeKind.MNN):
            self._receive_host(at, d, prev)
        else:
            self._transmit(at, d, prev)

    def _receive_host(self, at: int, d: Datagram, prev: int) -> None:
        if d.outer.dst != self.addr[at]:
            self._transmit(at, d, prev)
        elif d.layers >= 2:
            self._receive_host(at, decapsulate(d), prev)
        elif isinstance(d.body, Data):
            self._deliver(at, d, prev)
        elif isinstance(d.body, BindingUpdate) and at in self.cns:
            ba = ro.cn_on_binding_update(self.cns[at], d, next(self.ids))
            self._transmit(at, ba, at)

    def _receive_ha(self, at: int, d: Datagram, prev: int) -> None:
        ha = self.has[at]
        now = self.engine.now
        if d.outer.dst == ha.address:
            if d.layers >= 2:
                self._apply(at, bs.ha_intercept(ha, d, now), prev)
            elif isinstance(d.body, BindingUpdate):
                ba = bs.ha_on_binding_update(ha, d, now, next(self.ids))
                self._transmit(at, ba, at)
            elif isinstance(d.body, RoAuthRequest):
                self._apply(at, ro.ha_on_ro_auth_request(ha, d, now, next(self.ids)), at)
        elif ha.serves(d.outer.dst):
            self._apply(at, bs.ha_intercept(ha, d, now), prev)
        else:
            self._transmit(at, d, prev)

    def _receive_mr(self, at: int, d: Datagram, prev: int, local: bool) -> None:
        mr, reg = self.mrs[at], self.registries[at]
        if not local and prev != at and self.topology.inside(prev, at):
            if self.ro_mode:
                action = ro.mr_on_mnn_packet_ro(mr, reg, d)
            else:
                action = bs.mr_on_egress_from_mnn(mr, d)
            self._apply(at, action, prev)
        elif mr.current_coa is not None and d.outer.dst == mr.current_coa:
            if d.layers >= 2:
                self._mr_tunnel(at, mr, reg, d, prev)
            elif isinstance(d.body, BindingAck):
                if d.outer.src == mr.ha_address:
                    bs.mr_on_binding_ack(mr, d)
                elif self.ro_mode and ro.mr_on_cn_binding_ack(reg, d):
                    self._record(TraceRecord(self.engine.now, d.id, at, at, 0, m.RO_ACTIVE))
        elif d.outer.dst == mr.home_address:
            if isinstance(d.body, RoAuthAck) and d.outer.src == mr.ha_address and self.ro_mode:
                for bu in ro.mr_on_ro_auth_ack(mr, reg, d.body, self.ids):
                    self._send_cn_bu(at, bu)
        else:
            self._transmit(at, d, prev)

    def _mr_tunnel(self, at: int, mr: bs.MrState, reg: ro.CnRegistry, d: Datagram, prev: int) -> None:
        from_ha = d.outer.src == mr.ha_address
        action = bs.mr_on_tunnel_packet(mr, d, reg.trusted() if self.ro_mode else frozenset())
        if (self.ro_mode and from_ha and isinstance(action, bs.Forward)
                and prefix_contains(mr.mnp, action.d.outer.dst)):
            for a in ro.mr_on_inbound_data(mr, reg, action.d, self.engine.now, self.ids):
                self._apply(at, a, prev if a.d.id == d.id else at)
        else:
            self._apply(at, action, prev)


def run_scenario(spec: ScenarioSpec, max_events: int = DEFAULT_MAX_EVENTS
                 ) -> Tuple[List[TraceRecord], MetricsReport]:
    return Simulation(spec, max_events).run()
