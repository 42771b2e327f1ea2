"""NEMO Basic Support: mobile router and home agent behaviour.

Each function takes the node state plus one input and returns what the node
emits.  State objects are mutated in place; the simulation owns them and is
the only caller, so no copying is done.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, Optional, Set, Union

from .netmodel import (
    Address,
    Audience,
    BindingAck,
    BindingStatus,
    BindingUpdate,
    Datagram,
    Prefix,
    decapsulate,
    encapsulate,
    prefix_contains,
)

DEFAULT_LIFETIME_MS = 30_000
BU_RETRANSMIT_MS = 1_000


class DropReason(str, enum.Enum):
    BAD_TUNNEL_SOURCE = "BadTunnelSource"
    NOT_MNP = "NotMnp"
    NO_BINDING = "NoBinding"
    NOT_BOUND = "NotBound"
    POLICY_VISITOR = "PolicyVisitor"
    UNROUTABLE = "Unroutable"

    def __str__(self):
        return self.value


class VisitorPolicy(enum.Enum):
    ALLOW = "allow"
    DENY = "deny"


class UnknownPrefix(Exception):
    pass


@dataclass(frozen=True)
class Forward:
    """Route ``d`` onward from the current node."""

    d: Datagram


@dataclass(frozen=True)
class Drop:
    reason: DropReason
    d: Datagram


Action = Union[Forward, Drop]


@dataclass(frozen=True)
class Tunnel:
    local: Address
    remote: Address


@dataclass
class MrState:
    home_address: Address
    ha_address: Address
    mnp: Prefix
    current_coa: Optional[Address] = None
    bound: bool = False
    bu_seq: int = 0
    tunnel: Optional[Tunnel] = None
    lifetime_ms: int = DEFAULT_LIFETIME_MS
    # seq of the BU awaiting its BA, and whether it was already resent
    pending_bu: Optional[int] = None
    bu_resent: bool = False


@dataclass
class BindingCacheEntry:
    home_address: Address
    mnp: Prefix
    coa: Address
    seq: int
    expires_at_ms: int

    def live(self, now_ms: int) -> bool:
        return now_ms < self.expires_at_ms


@dataclass
class HaState:
    address: Address
    served_prefixes: Set[Prefix] = field(default_factory=set)
    cache: Dict[Address, BindingCacheEntry] = field(default_factory=dict)
    visiting_traffic_policy: VisitorPolicy = VisitorPolicy.ALLOW
    # CN addresses for which route optimisation is refused
    ro_denied: Set[Address] = field(default_factory=set)

    def entry_for(self, dst: Address, now_ms: int) -> Optional[BindingCacheEntry]:
        for entry in self.cache.values():
            if entry.live(now_ms) and prefix_contains(entry.mnp, dst):
                return entry
        return None

    def entry_by_coa(self, coa: Address, now_ms: int) -> Optional[BindingCacheEntry]:
        for entry in self.cache.values():
            if entry.live(now_ms) and entry.coa == coa:
                return entry
        return None

    def serves(self, dst: Address) -> bool:
        return any(prefix_contains(p, dst) for p in self.served_prefixes)


def mr_on_attach(mr: MrState, coa: Address, pkt_id: int) -> Datagram:
    mr.current_coa = coa
    mr.bound = False
    mr.tunnel = None
    mr.bu_seq += 1
    mr.pending_bu = mr.bu_seq
    mr.bu_resent = False
    return _home_bu(mr, pkt_id)


def _home_bu(mr: MrState, pkt_id: int) -> Datagram:
    bu = BindingUpdate(
        subject=mr.mnp,
        coa=mr.current_coa,
        seq=mr.bu_seq,
        lifetime_ms=mr.lifetime_ms,
        audience=Audience.TO_HOME_AGENT,
        home_address=mr.home_address,
    )
    return Datagram.make(mr.current_coa, mr.ha_address, bu, pkt_id)


def mr_on_bu_timeout(mr: MrState, seq: int, ids) -> Optional[Datagram]:
    """Resend the home BU once if its BA has not arrived; give up after that."""
    if mr.pending_bu != seq or mr.bound or mr.bu_resent:
        return None
    mr.bu_resent = True
    return _home_bu(mr, next(ids))


def mr_on_binding_ack(mr: MrState, d: Datagram) -> bool:
    ba = d.body
    if mr.pending_bu is None or ba.seq != mr.pending_bu:
        return mr.bound
    mr.pending_bu = None
    if ba.status is BindingStatus.ACCEPTED:
        mr.bound = True
        mr.tunnel = Tunnel(local=mr.current_coa, remote=mr.ha_address)
    return mr.bound


def ha_on_binding_update(ha: HaState, d: Datagram, now_ms: int, pkt_id: int) -> Datagram:
    bu = d.body
    if bu.audience is not Audience.TO_HOME_AGENT:
        raise ValueError("home agent only processes home registrations")
    if bu.subject not in ha.served_prefixes:
        raise UnknownPrefix(f"{bu.subject} is not served by home agent {ha.address}")
    stored = ha.cache.get(bu.home_address)
    if stored is None or bu.seq > stored.seq:
        ha.cache[bu.home_address] = BindingCacheEntry(
            home_address=bu.home_address,
            mnp=bu.subject,
            coa=bu.coa,
            seq=bu.seq,
            expires_at_ms=now_ms + bu.lifetime_ms,
        )
        status = BindingStatus.ACCEPTED
    else:
        status = BindingStatus.REJECTED
    return Datagram.make(ha.address, bu.coa, BindingAck(bu.seq, status), pkt_id)


def ha_intercept(ha: HaState, d: Datagram, now_ms: int) -> Action:
    outer = d.outer
    if outer.dst == ha.address and d.layers >= 2:
        entry = ha.entry_by_coa(outer.src, now_ms)
        if entry is None:
            return Drop(DropReason.NO_BINDING, d)
        inner = decapsulate(d)
        if (ha.visiting_traffic_policy is VisitorPolicy.DENY
                and inner.outer.dst != ha.address
                and not prefix_contains(entry.mnp, inner.outer.src)):
            return Drop(DropReason.POLICY_VISITOR, inner)
        return Forward(inner)
    entry = ha.entry_for(outer.dst, now_ms)
    if entry is None:
        return Drop(DropReason.NO_BINDING, d)
    return Forward(encapsulate(d, ha.address, entry.coa))


def mr_owns(mr: MrState, addr: Address) -> bool:
    return addr == mr.home_address or (mr.current_coa is not None and addr == mr.current_coa)


def mr_on_tunnel_packet(mr: MrState, d: Datagram, trusted: Set[Address] = frozenset()) -> Action:
    """Check and strip a tunnel header at the MR.

    ``trusted`` holds extra outer sources accepted besides the home agent
    (correspondents with a direct binding).
    """
    if d.outer.src != mr.ha_address and d.outer.src not in trusted:
        return Drop(DropReason.BAD_TUNNEL_SOURCE, d)
    inner = decapsulate(d)
    dst = inner.outer.dst
    if not prefix_contains(mr.mnp, dst) and not mr_owns(mr, dst):
        return Drop(DropReason.NOT_MNP, inner)
    return Forward(inner)


def mr_on_egress_from_mnn(mr: MrState, d: Datagram) -> Action:
    if not mr.bound:
        return Drop(DropReason.NOT_BOUND, d)
    return Forward(encapsulate(d, mr.current_coa, mr.ha_address))
