"""Trace records and the numbers derived from them.

A trace is a flat, time-ordered list of ``TraceRecord``.  Link traversals
carry the message kind (``DATA``, ``BU`` ...); the remaining kinds mark
events at a single node: ``DELIVER``, ``DROP``, ``ATTACH`` and
``RO_ACTIVE``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .netmodel import HEADER_BYTES

DATA = "DATA"
DIRECT_DATA = "DIRECT_DATA"
BU = "BU"
BA = "BA"
BU_CN = "BU_CN"
BA_CN = "BA_CN"
RO_AUTH_REQ = "RO_AUTH_REQ"
RO_AUTH_ACK = "RO_AUTH_ACK"
DELIVER = "DELIVER"
DROP = "DROP"
ATTACH = "ATTACH"
RO_ACTIVE = "RO_ACTIVE"

DATA_KINDS = frozenset({DATA, DIRECT_DATA})
CONTROL_KINDS = frozenset({BU, BA, BU_CN, BA_CN, RO_AUTH_REQ, RO_AUTH_ACK})
TRAVERSAL_KINDS = DATA_KINDS | CONTROL_KINDS
EVENT_KINDS = frozenset({DELIVER, DROP, ATTACH, RO_ACTIVE})


class OutOfOrder(Exception):
    pass


class UnknownFlow(KeyError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    time_ms: int
    pkt_id: int
    from_: int
    to: int
    layers: int
    kind: str
    drop_reason: Optional[str] = None

    def line(self) -> str:
        return "\t".join(str(v) for v in (
            self.time_ms, self.pkt_id, self.kind, self.from_, self.to, self.layers,
            self.drop_reason or "-"))

    @classmethod
    def parse(cls, line: str) -> "TraceRecord":
        t, pkt, kind, a, b, layers, reason = line.rstrip("\n").split("\t")
        return cls(int(t), int(pkt), int(a), int(b), int(layers), kind,
                   None if reason == "-" else reason)


def format_trace(records: Iterable[TraceRecord]) -> str:
    return "".join(r.line() + "\n" for r in records)


def parse_trace(text: str) -> List[TraceRecord]:
    return [TraceRecord.parse(line) for line in text.splitlines() if line.strip()]


@dataclass
class _PacketStats:
    flow_id: int
    payload_bytes: int
    traversals: int = 0
    bytes_on_wire: int = 0
    overhead_bytes: int = 0
    ha_visits: int = 0
    delivered: bool = False
    dropped: bool = False
    shortest: Optional[int] = None


@dataclass
class FlowMetrics:
    flow_id: int
    src: str
    dst: str
    injected: int
    delivered: int
    dropped: int
    traversals: float
    shortest_possible: float
    stretch: float
    bytes_on_wire: int
    overhead_bytes: int
    ha_share: float


@dataclass
class MetricsReport:
    flows: List[FlowMetrics] = field(default_factory=list)
    ha_traversal_share: float = 0.0
    signaling_msgs_per_handoff: float = 0.0
    drops_by_reason: Dict[str, int] = field(default_factory=dict)


class MetricsStore:
    """Append-only trace plus per-packet counters for registered data flows."""

    def __init__(self, ha_nodes: Iterable[int] = ()):
        self.records: List[TraceRecord] = []
        self.ha_nodes: Set[int] = set(ha_nodes)
        self.flows: Dict[int, Tuple[str, str]] = {}
        self.packets: Dict[int, _PacketStats] = {}
        self.t_end: Optional[int] = None

    def register_flow(self, flow_id: int, src: str, dst: str) -> None:
        self.flows[flow_id] = (src, dst)

    def register_packet(self, pkt_id: int, flow_id: int, payload_bytes: int) -> None:
        if flow_id not in self.flows:
            raise UnknownFlow(flow_id)
        self.packets[pkt_id] = _PacketStats(flow_id, payload_bytes)

    def note_shortest(self, pkt_id: int, hops: int) -> None:
        self.packets[pkt_id].shortest = hops

    def record_traversal(self, rec: TraceRecord) -> None:
        if self.records and rec.time_ms < self.records[-1].time_ms:
            raise OutOfOrder(f"record at {rec.time_ms} after {self.records[-1].time_ms}")
        self.records.append(rec)
        stats = self.packets.get(rec.pkt_id)
        if stats is None:
            return
        if rec.kind in TRAVERSAL_KINDS:
            stats.traversals += 1
            stats.bytes_on_wire += stats.payload_bytes + HEADER_BYTES * rec.layers
            stats.overhead_bytes += HEADER_BYTES * (rec.layers - 1)
            if rec.from_ in self.ha_nodes or rec.to in self.ha_nodes:
                stats.ha_visits += 1
        elif rec.kind == DELIVER:
            stats.delivered = True
        elif rec.kind == DROP:
            stats.dropped = True

    def packet_traversals(self, pkt_id: int) -> int:
        return self.packets[pkt_id].traversals

    def flow_packets(self, flow_id: int) -> List[_PacketStats]:
        if flow_id not in self.flows:
            raise UnknownFlow(flow_id)
        return [p for p in self.packets.values() if p.flow_id == flow_id]


def flow_summary(store: MetricsStore, flow_id: int) -> FlowMetrics:
    pkts = store.flow_packets(flow_id)
    done = [p for p in pkts if p.delivered]
    hops = sum(p.traversals for p in done)
    shortest = sum(p.shortest or 0 for p in done)
    n = len(done)
    src, dst = store.flows[flow_id]
    return FlowMetrics(
        flow_id=flow_id,
        src=src,
        dst=dst,
        injected=len(pkts),
        delivered=n,
        dropped=sum(1 for p in pkts if p.dropped),
        traversals=round(hops / n, 6) if n else 0.0,
        shortest_possible=round(shortest / n, 6) if n else 0.0,
        stretch=round(hops / shortest, 6) if shortest else 0.0,
        bytes_on_wire=sum(p.bytes_on_wire for p in pkts),
        overhead_bytes=sum(p.overhead_bytes for p in pkts),
        ha_share=round(sum(1 for p in done if p.ha_visits) / n, 6) if n else 0.0,
    )


def _originations(records: Iterable[TraceRecord]) -> Dict[int, TraceRecord]:
    first: Dict[int, TraceRecord] = {}
    for rec in records:
        if rec.kind in TRAVERSAL_KINDS and rec.pkt_id not in first:
            first[rec.pkt_id] = rec
    return first


def signaling_breakdown(store: MetricsStore, window: Tuple[int, Optional[int]]) -> Counter:
    start, end = window
    counts: Counter = Counter()
    for rec in _originations(store.records).values():
        if rec.kind in CONTROL_KINDS and rec.time_ms >= start and (end is None or rec.time_ms < end):
            counts[rec.kind] += 1
    return counts


def signaling_cost(store: MetricsStore, window: Tuple[int, Optional[int]]) -> int:
    return sum(signaling_breakdown(store, window).values())


def attach_windows(store: MetricsStore, handoffs_only: bool = True) -> List[Tuple[int, Optional[int]]]:
    """One window per attach event, running until the next attach of any MR."""
    attaches = [r for r in store.records if r.kind == ATTACH]
    seen: Set[int] = set()
    windows = []
    for i, rec in enumerate(attaches):
        end = attaches[i + 1].time_ms if i + 1 < len(attaches) else None
        if rec.from_ in seen or not handoffs_only:
            windows.append((rec.time_ms, end))
        seen.add(rec.from_)
    return windows


def build_report(store: MetricsStore) -> MetricsReport:
    flows = [flow_summary(store, f) for f in sorted(store.flows)]
    delivered = [p for p in store.packets.values() if p.delivered]
    share = sum(1 for p in delivered if p.ha_visits) / len(delivered) if delivered else 0.0
    windows = attach_windows(store)
    per_handoff = (sum(signaling_cost(store, w) for w in windows) / len(windows)) if windows else 0.0
    drops = Counter(r.drop_reason for r in store.records if r.kind == DROP)
    return MetricsReport(
        flows=flows,
        ha_traversal_share=round(share, 6),
        signaling_msgs_per_handoff=round(per_handoff, 6),
        drops_by_reason=dict(sorted(drops.items())),
    )


def milestones(records: List[TraceRecord], ha_nodes: Set[int]) -> List[str]:
    """Collapse a trace into its protocol-level story.

    Each message contributes one token where it is first transmitted; data
    packets are tagged ``DATA:HA`` when any hop touched a home agent and
    become ``DIRECT_DATA`` when any hop used a direct binding.  ``DELIVER``
    sits at the final hop into the destination, and ``RO_ACTIVE`` where the
    MR marked a correspondent active.
    """
    delivered_at = {r.pkt_id: r.to for r in records if r.kind == DELIVER}
    last_hop: Dict[int, int] = {}
    kinds: Dict[int, Set[str]] = {}
    via_ha: Set[int] = set()
    for i, rec in enumerate(records):
        if rec.kind in TRAVERSAL_KINDS:
            kinds.setdefault(rec.pkt_id, set()).add(rec.kind)
            if rec.from_ in ha_nodes or rec.to in ha_nodes:
                via_ha.add(rec.pkt_id)
            if delivered_at.get(rec.pkt_id) == rec.to:
                last_hop[rec.pkt_id] = i
    final_hops = set(last_hop.values())
    first = {id(r) for r in _originations(records).values()}
    out = []
    for i, rec in enumerate(records):
        if id(rec) in first:
            ks = kinds[rec.pkt_id]
            if DIRECT_DATA in ks:
                out.append(DIRECT_DATA)
            elif DATA in ks:
                out.append("DATA:HA" if rec.pkt_id in via_ha else DATA)
            else:
                out.append(rec.kind)
        if i in final_hops:
            out.append(DELIVER)
        if rec.kind == RO_ACTIVE:
            out.append(RO_ACTIVE)
    return out
