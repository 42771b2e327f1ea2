"""Discrete-event engine, topology graph and hop-count routing.

Routing is recomputed from the live topology on demand: for a destination
address the owning node is resolved first (exact address, mobile network
prefix anchored at its home agent, then access-router prefix), and a
breadth-first search from that node gives the hop distance used to pick
the next hop.  Ties go to the smallest neighbour id.
"""

from __future__ import annotations

import enum
import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from .netmodel import Address, Datagram, Prefix, prefix_contains

DEFAULT_MAX_EVENTS = 10_000_000


class Unroutable(Exception):
    pass


class UnknownNode(Exception):
    pass


class EventStorm(RuntimeError):
    pass


class NodeKind(enum.Enum):
    CN = "cn"
    ROUTER = "router"
    HOME_AGENT = "ha"
    ACCESS_ROUTER = "ar"
    MOBILE_ROUTER = "mr"
    MNN = "mnn"


MOBILE_KINDS = (NodeKind.MOBILE_ROUTER, NodeKind.MNN)


@dataclass
class Node:
    id: int
    name: str
    kind: NodeKind
    address: Optional[Address] = None
    # AR: advertised prefix, MR: mobile network prefix, HA: home prefix
    prefix: Optional[Prefix] = None
    ha: Optional[int] = None
    mr: Optional[int] = None
    parent: Optional[int] = None


@dataclass
class Link:
    a: int
    b: int
    delay_ms: int
    up: bool = True

    def __post_init__(self):
        if self.delay_ms < 1:
            raise ValueError(f"link {self.a}-{self.b}: delay must be >= 1 ms")

    def other(self, n: int) -> int:
        return self.b if n == self.a else self.a


# Engine actions.  The engine itself only orders them; a handler interprets.

@dataclass(frozen=True)
class DeliverDatagram:
    at: int
    d: Datagram
    from_: int


@dataclass(frozen=True)
class AttachMr:
    mr: int
    ar: int


@dataclass(frozen=True)
class InjectTraffic:
    flow_id: int
    index: int


@dataclass(frozen=True)
class SetLink:
    a: int
    b: int
    up: bool


@dataclass(frozen=True)
class Timer:
    callback: Callable[[], None]


@dataclass(order=True)
class Event:
    time_ms: int
    seq: int
    action: Any = field(compare=False)


class Engine:
    """Single-threaded event queue ordered by (time_ms, insertion seq)."""

    def __init__(self, handler: Optional[Callable[[Any], None]] = None,
                 max_events: int = DEFAULT_MAX_EVENTS):
        self.handler = handler
        self.max_events = max_events
        self.now = 0
        self.processed = 0
        self._queue: List[Event] = []
        self._seq = 0

    def schedule(self, delay_ms: int, action) -> int:
        if delay_ms < 0:
            raise ValueError("delay must be non-negative")
        self._seq += 1
        heapq.heappush(self._queue, Event(self.now + delay_ms, self._seq, action))
        return self._seq

    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, t_end_ms: int) -> None:
        while self._queue and self._queue[0].time_ms <= t_end_ms:
            ev = heapq.heappop(self._queue)
            assert ev.time_ms >= self.now, "event queue went backwards"
            self.now = ev.time_ms
            self.processed += 1
            if self.processed > self.max_events:
                raise EventStorm(f"more than {self.max_events} events processed by t={self.now}")
            if self.handler is not None:
                self.handler(ev.action)
            else:
                ev.action()
        self.now = max(self.now, t_end_ms)


class Topology:
    def __init__(self):
        self.nodes: Dict[int, Node] = {}
        self.attachments: Dict[int, int] = {}
        self.coas: Dict[int, Address] = {}
        self._links: Dict[frozenset, Link] = {}
        self._adj: Dict[int, List[int]] = {}
        self._dist_cache: Dict[int, Dict[int, int]] = {}

    # construction

    def add_node(self, node: Node) -> Node:
        if node.id in self.nodes:
            raise ValueError(f"duplicate node id {node.id}")
        self.nodes[node.id] = node
        self._adj[node.id] = []
        self._invalidate()
        return node

    def add_link(self, a: int, b: int, delay_ms: int, up: bool = True) -> Link:
        for n in (a, b):
            if n not in self.nodes:
                raise UnknownNode(n)
        key = frozenset((a, b))
        if key in self._links or a == b:
            raise ValueError(f"bad or duplicate link {a}-{b}")
        link = Link(a, b, delay_ms, up)
        self._links[key] = link
        self._adj[a].append(b)
        self._adj[b].append(a)
        self._adj[a].sort()
        self._adj[b].sort()
        self._invalidate()
        return link

    def set_link_state(self, a: int, b: int, up: bool) -> None:
        link = self.link(a, b)
        if link is None:
            raise UnknownNode(f"no link {a}-{b}")
        link.up = up
        self._invalidate()

    def _invalidate(self):
        self._dist_cache.clear()

    # queries

    def node(self, n: int) -> Node:
        try:
            return self.nodes[n]
        except KeyError:
            raise UnknownNode(n) from None

    def link(self, a: int, b: int) -> Optional[Link]:
        return self._links.get(frozenset((a, b)))

    @property
    def links(self) -> List[Link]:
        return list(self._links.values())

    def is_attachment_link(self, link: Link) -> bool:
        ka, kb = self.nodes[link.a].kind, self.nodes[link.b].kind
        mr = NodeKind.MOBILE_ROUTER
        return (ka is mr and kb in (mr, NodeKind.ACCESS_ROUTER)) or (kb is mr and ka is NodeKind.ACCESS_ROUTER)

    def link_up(self, a: int, b: int) -> bool:
        link = self.link(a, b)
        if link is None or not link.up:
            return False
        if self.is_attachment_link(link):
            return self.attachments.get(a) == b or self.attachments.get(b) == a
        return True

    def neighbors(self, n: int) -> List[int]:
        return [m for m in self._adj[n] if self.link_up(n, m)]

    def delay(self, a: int, b: int) -> int:
        return self._links[frozenset((a, b))].delay_ms

    def inside(self, n: int, mr: int) -> bool:
        """True when ``n`` sits in the mobile network of ``mr`` (or is ``mr``)."""
        seen = set()
        while n is not None and n not in seen:
            if n == mr:
                return True
            seen.add(n)
            node = self.nodes[n]
            if node.kind is NodeKind.MNN:
                n = node.mr
            elif node.kind is NodeKind.MOBILE_ROUTER:
                up = self.attachments.get(n)
                n = up if up is not None and self.nodes[up].kind is NodeKind.MOBILE_ROUTER else None
            else:
                n = None
        return False

    def mnp_owner(self, addr: Address) -> Optional[int]:
        best, best_len = None, -1
        for node in self.nodes.values():
            if node.kind is NodeKind.MOBILE_ROUTER and node.prefix is not None:
                if node.prefix.length > best_len and prefix_contains(node.prefix, addr):
                    best, best_len = node.id, node.prefix.length
        return best

    def exact_owner(self, addr: Address) -> Optional[int]:
        for mr, coa in self.coas.items():
            if coa == addr:
                return mr
        for node in self.nodes.values():
            # an away MR is only reachable at its care-of address
            if node.kind is not NodeKind.MOBILE_ROUTER and node.address == addr:
                return node.id
        return None

    def resolve(self, at: int, dst: Address) -> Optional[int]:
        """Node that routing should steer toward when ``dst`` is seen at ``at``."""
        mr = self.mnp_owner(dst)
        if mr is not None and not self.inside(at, mr):
            return self.nodes[mr].ha
        exact = self.exact_owner(dst)
        if exact is not None and self.coas.get(exact) == dst and at not in self.distances_to(exact):
            # a care-of address whose MR is cut off is routed like any other
            # address in the access router's prefix
            exact = None
        elif exact is not None or mr is not None:
            return exact
        best, best_len = None, -1
        for node in self.nodes.values():
            if node.kind in MOBILE_KINDS or node.prefix is None:
                continue
            if node.prefix.length > best_len and prefix_contains(node.prefix, dst):
                best, best_len = node.id, node.prefix.length
        return best

    def distances_to(self, target: int) -> Dict[int, int]:
        dist = self._dist_cache.get(target)
        if dist is None:
            dist = {target: 0}
            queue = deque([target])
            while queue:
                n = queue.popleft()
                for m in self.neighbors(n):
                    if m not in dist:
                        dist[m] = dist[n] + 1
                        queue.append(m)
            self._dist_cache[target] = dist
        return dist

    def shortest_hops(self, a: int, b: int) -> Optional[int]:
        return self.distances_to(b).get(a)

    def path(self, at: int, dst: Address) -> List[int]:
        """Full hop sequence from ``at`` to the resolved owner of ``dst``."""
        hops = [at]
        while True:
            target = self.resolve(hops[-1], dst)
            if target == hops[-1]:
                return hops
            hops.append(next_hop(self, hops[-1], dst))
            if len(hops) > len(self.nodes) + 1:
                raise Unroutable(f"routing loop toward {dst}")


def next_hop(topology: Topology, at: int, dst: Address) -> int:
    target = topology.resolve(at, dst)
    if target is None:
        raise Unroutable(f"no node owns {dst}")
    if target == at:
        raise Unroutable(f"{dst} resolves to node {at} itself")
    dist = topology.distances_to(target)
    if at not in dist:
        raise Unroutable(f"node {at} is cut off from node {target}")
    for m in topology.neighbors(at):
        if dist.get(m) == dist[at] - 1:
            return m
    raise Unroutable(f"no next hop from {at} toward {target}")  # pragma: no cover


def apply_attach(topology: Topology, mr: int, ar: int) -> Address:
    mr_node, ar_node = topology.node(mr), topology.node(ar)
    if mr_node.kind is not NodeKind.MOBILE_ROUTER:
        raise ValueError(f"node {mr_node.name} is not a mobile router")
    if ar_node.kind not in (NodeKind.ACCESS_ROUTER, NodeKind.MOBILE_ROUTER) or ar == mr:
        raise ValueError(f"node {ar_node.name} cannot serve as a point of attachment")
    if ar_node.prefix is None:
        raise ValueError(f"node {ar_node.name} advertises no prefix")
    coa = ar_node.prefix.base + mr
    owner = topology.exact_owner(coa)
    if owner is not None and owner != mr:
        raise ValueError(f"care-of address {coa} collides with node {owner}")
    topology.attachments[mr] = ar
    topology.coas[mr] = coa
    topology._invalidate()
    return coa
