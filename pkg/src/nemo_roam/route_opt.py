"""Route optimisation between a mobile router and its correspondents.

Two procedures sit on top of Basic Support:

* new correspondent: the first data packet that reaches the MR through the
  home tunnel triggers an authorisation round trip with the home agent, after
  which the MR binds the MNN address to its care-of address at the CN;
* known correspondent: on every new care-of address the MR sends a binding
  update straight to each active correspondent.

The MNN takes no part in either; all state lives in the MR's ``CnRegistry``
and the correspondent's ``CnAddressTable``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .nemo_bs import (
    Action,
    Drop,
    DropReason,
    Forward,
    HaState,
    MrState,
    mr_on_egress_from_mnn,
)
from .netmodel import (
    Address,
    Audience,
    BindingAck,
    BindingStatus,
    BindingUpdate,
    Data,
    Datagram,
    MessageBody,
    RoAuthAck,
    RoAuthRequest,
    encapsulate,
)

BU_CN_RETRANSMIT_MS = 1_000


class UnknownCn(Exception):
    pass


class EntryState(enum.Enum):
    AUTH_PENDING = "AuthPending"
    ACTIVE = "Active"


class CnClass(enum.Enum):
    NEW = "New"
    PENDING = "Pending"
    REGISTERED = "Registered"


@dataclass
class CnEntry:
    mnns: Set[Address]
    state: EntryState
    registered_at_ms: int
    last_bu_seq: int = 0
    bu_sent: bool = False


@dataclass
class CnRegistry:
    entries: Dict[Address, CnEntry] = field(default_factory=dict)
    # CNs the home agent refused; they stay on the home tunnel for good
    denied: Set[Address] = field(default_factory=set)
    auth_seq: int = 0
    # (cn, seq) -> [mnn, resent] for binding updates still waiting on a BA
    outstanding: Dict[Tuple[Address, int], list] = field(default_factory=dict)

    def trusted(self) -> Set[Address]:
        return {cn for cn, e in self.entries.items() if e.bu_sent}

    def active(self, cn: Address) -> bool:
        entry = self.entries.get(cn)
        return entry is not None and entry.state is EntryState.ACTIVE


@dataclass
class TableEntry:
    mr_coa: Address
    seq: int


@dataclass
class CnAddressTable:
    entries: Dict[Address, TableEntry] = field(default_factory=dict)


@dataclass
class CnState:
    address: Address
    table: CnAddressTable = field(default_factory=CnAddressTable)


def mr_classify_cn(reg: CnRegistry, cn: Address) -> CnClass:
    entry = reg.entries.get(cn)
    if entry is None:
        return CnClass.NEW
    if entry.state is EntryState.AUTH_PENDING:
        return CnClass.PENDING
    return CnClass.REGISTERED


def _cn_bu(mr: MrState, reg: CnRegistry, cn: Address, mnn: Address, pkt_id: int) -> Datagram:
    entry = reg.entries[cn]
    entry.last_bu_seq += 1
    entry.bu_sent = True
    bu = BindingUpdate(
        subject=mnn,
        coa=mr.current_coa,
        seq=entry.last_bu_seq,
        lifetime_ms=mr.lifetime_ms,
        audience=Audience.TO_CORRESPONDENT,
    )
    reg.outstanding[(cn, entry.last_bu_seq)] = [mnn, False]
    return Datagram.make(mr.current_coa, cn, bu, pkt_id)


def mr_on_inbound_data(mr: MrState, reg: CnRegistry, inner: Datagram, now_ms: int, ids) -> List[Action]:
    """Hand a tunnelled data packet to the MNN and start a handshake for new CNs.

    ``ids`` is an iterator of fresh datagram ids.
    """
    actions: List[Action] = [Forward(inner)]
    if not isinstance(inner.body, Data) or inner.layers != 1:
        return actions
    cn, mnn = inner.outer.src, inner.outer.dst
    if cn in reg.denied:
        return actions
    cls = mr_classify_cn(reg, cn)
    if cls is CnClass.NEW:
        reg.entries[cn] = CnEntry({mnn}, EntryState.AUTH_PENDING, now_ms)
        reg.auth_seq += 1
        req = Datagram.make(mr.home_address, mr.ha_address, RoAuthRequest(cn, mnn, reg.auth_seq), next(ids))
        actions.append(Forward(encapsulate(req, mr.current_coa, mr.ha_address)))
    else:
        entry = reg.entries[cn]
        if mnn not in entry.mnns:
            entry.mnns.add(mnn)
            if entry.state is EntryState.ACTIVE:
                actions.append(Forward(_cn_bu(mr, reg, cn, mnn, next(ids))))
    return actions


def ha_on_ro_auth_request(ha: HaState, d: Datagram, now_ms: int, pkt_id: int) -> Action:
    """Answer an MR's authorisation request through the tunnel.

    ``d`` is the already decapsulated request, addressed to the home agent.
    """
    req = d.body
    entry = ha.cache.get(d.outer.src)
    if entry is None or not entry.live(now_ms):
        return Drop(DropReason.NO_BINDING, d)
    ack = RoAuthAck(cn=req.cn, granted=req.cn not in ha.ro_denied, seq=req.seq)
    reply = Datagram.make(ha.address, entry.home_address, ack, pkt_id)
    return Forward(encapsulate(reply, ha.address, entry.coa))


def mr_on_ro_auth_ack(mr: MrState, reg: CnRegistry, ack: RoAuthAck, ids) -> List[Datagram]:
    entry = reg.entries.get(ack.cn)
    if entry is None:
        raise UnknownCn(f"authorisation ack for unregistered CN {ack.cn}")
    if entry.state is not EntryState.AUTH_PENDING or entry.bu_sent:
        return []
    if not ack.granted:
        del reg.entries[ack.cn]
        reg.denied.add(ack.cn)
        return []
    return [_cn_bu(mr, reg, ack.cn, mnn, next(ids)) for mnn in sorted(entry.mnns)]


def mr_on_cn_binding_ack(reg: CnRegistry, d: Datagram) -> bool:
    """Process a correspondent's BA; True when it just made the entry active."""
    cn, ba = d.inner.src, d.body
    if reg.outstanding.pop((cn, ba.seq), None) is None:
        return False
    entry = reg.entries.get(cn)
    if entry is None or ba.status is not BindingStatus.ACCEPTED:
        return False
    if entry.state is EntryState.ACTIVE:
        return False
    entry.state = EntryState.ACTIVE
    return True


def mr_on_bu_cn_timeout(mr: MrState, reg: CnRegistry, cn: Address, seq: int, ids) -> Optional[Datagram]:
    """Resend an unanswered CN binding update once, then forget it."""
    pending = reg.outstanding.get((cn, seq))
    if pending is None:
        return None
    mnn, resent = pending
    if resent or cn not in reg.entries:
        del reg.outstanding[(cn, seq)]
        return None
    pending[1] = True
    bu = BindingUpdate(
        subject=mnn,
        coa=mr.current_coa,
        seq=seq,
        lifetime_ms=mr.lifetime_ms,
        audience=Audience.TO_CORRESPONDENT,
    )
    return Datagram.make(mr.current_coa, cn, bu, next(ids))


def cn_on_binding_update(cn: CnState, d: Datagram, pkt_id: int) -> Datagram:
    bu = d.body
    if bu.audience is not Audience.TO_CORRESPONDENT:
        raise ValueError("correspondents only process correspondent binding updates")
    stored = cn.table.entries.get(bu.subject)
    if stored is None or bu.seq > stored.seq:
        cn.table.entries[bu.subject] = TableEntry(bu.coa, bu.seq)
        status = BindingStatus.ACCEPTED
    else:
        status = BindingStatus.REJECTED
    return Datagram.make(cn.address, bu.coa, BindingAck(bu.seq, status), pkt_id)


def cn_send(cn: CnState, mnn: Address, body: MessageBody, pkt_id: int) -> Datagram:
    inner = Datagram.make(cn.address, mnn, body, pkt_id)
    entry = cn.table.entries.get(mnn)
    if entry is None:
        return inner
    return encapsulate(inner, cn.address, entry.mr_coa)


def mr_on_mnn_packet_ro(mr: MrState, reg: CnRegistry, d: Datagram) -> Action:
    dst = d.outer.dst
    if not reg.active(dst):
        return mr_on_egress_from_mnn(mr, d)
    if not mr.bound:
        return Drop(DropReason.NOT_BOUND, d)
    return Forward(encapsulate(d, mr.current_coa, dst))


def mr_on_handoff_broadcast(mr: MrState, reg: CnRegistry, new_coa: Address, ids) -> List[Datagram]:
    if mr.current_coa != new_coa:
        raise ValueError("broadcast must follow the home registration for the same care-of address")
    out = []
    for cn in sorted(reg.entries):
        entry = reg.entries[cn]
        if entry.state is EntryState.ACTIVE:
            out.extend(_cn_bu(mr, reg, cn, mnn, next(ids)) for mnn in sorted(entry.mnns))
    return out
