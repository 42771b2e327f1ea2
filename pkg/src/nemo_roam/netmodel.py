"""Addresses, prefixes, message bodies and datagrams.

A datagram is an immutable value: a stack of ``Header`` objects (index 0 is
the outermost) wrapped around a single message body.  Tunnelling is modelled
by pushing and popping headers; nothing else about IPv6 is represented.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

ADDRESS_BITS = 128
ADDRESS_MASK = (1 << ADDRESS_BITS) - 1

HEADER_BYTES = 40
CONTROL_BODY_BYTES = 24
MAX_ENCAP_DEPTH = 8


class EncapDepthExceeded(Exception):
    pass


class NoInnerHeader(Exception):
    pass


@dataclass(frozen=True, order=True)
class Address:
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= ADDRESS_MASK:
            raise ValueError(f"address out of range: {self.value:#x}")

    @classmethod
    def parse(cls, text: str) -> "Address":
        text = text.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if not text or len(text) > 32:
            raise ValueError(f"bad address literal {text!r}")
        return cls(int(text, 16))

    def __add__(self, offset: int) -> "Address":
        return Address(self.value + offset)

    def __str__(self):
        return f"{self.value:032x}"

    def __repr__(self):
        return f"Address({self})"


@dataclass(frozen=True, order=True)
class Prefix:
    base: Address
    length: int

    def __post_init__(self):
        if not 0 <= self.length <= ADDRESS_BITS:
            raise ValueError(f"prefix length out of range: {self.length}")
        host_bits = ADDRESS_BITS - self.length
        if self.base.value & ((1 << host_bits) - 1):
            raise ValueError(f"prefix {self.base}/{self.length} is not canonical")

    @classmethod
    def parse(cls, text: str) -> "Prefix":
        addr, sep, length = text.partition("/")
        if not sep:
            raise ValueError(f"prefix {text!r} lacks a length")
        return cls(Address.parse(addr), int(length))

    def __str__(self):
        return f"{self.base}/{self.length}"

    def __repr__(self):
        return f"Prefix({self})"


def prefix_contains(p: Prefix, a: Address) -> bool:
    shift = ADDRESS_BITS - p.length
    return (a.value >> shift) == (p.base.value >> shift)


class Audience(enum.Enum):
    TO_HOME_AGENT = "ToHomeAgent"
    TO_CORRESPONDENT = "ToCorrespondent"


class BindingStatus(enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class Data:
    flow_id: int
    seq: int
    payload_bytes: int

    def __post_init__(self):
        if self.payload_bytes < 0 or self.seq < 0:
            raise ValueError("payload_bytes and seq must be non-negative")


@dataclass(frozen=True)
class BindingUpdate:
    """Binding update for a home agent (prefix subject) or a CN (MNN subject).

    ``home_address`` is only set on home-agent updates; it is the key of the
    binding cache entry.
    """

    subject: Union[Prefix, Address]
    coa: Address
    seq: int
    lifetime_ms: int
    audience: Audience
    home_address: Optional[Address] = None

    def __post_init__(self):
        if self.seq < 0:
            raise ValueError("seq must be non-negative")
        if self.audience is Audience.TO_HOME_AGENT and not isinstance(self.subject, Prefix):
            raise ValueError("home agent binding update must carry a prefix subject")
        if self.audience is Audience.TO_CORRESPONDENT and not isinstance(self.subject, Address):
            raise ValueError("correspondent binding update must carry an address subject")


@dataclass(frozen=True)
class BindingAck:
    seq: int
    status: BindingStatus


@dataclass(frozen=True)
class RoAuthRequest:
    cn: Address
    mnn: Address
    seq: int


@dataclass(frozen=True)
class RoAuthAck:
    cn: Address
    granted: bool
    seq: int


MessageBody = Union[Data, BindingUpdate, BindingAck, RoAuthRequest, RoAuthAck]


@dataclass(frozen=True)
class Header:
    src: Address
    dst: Address


@dataclass(frozen=True)
class Datagram:
    headers: tuple
    body: MessageBody
    id: int

    def __post_init__(self):
        object.__setattr__(self, "headers", tuple(self.headers))
        if len(self.headers) < 1:
            raise ValueError("a datagram needs at least one header")

    @classmethod
    def make(cls, src: Address, dst: Address, body: MessageBody, id: int) -> "Datagram":
        return cls((Header(src, dst),), body, id)

    @property
    def outer(self) -> Header:
        return self.headers[0]

    @property
    def inner(self) -> Header:
        return self.headers[-1]

    @property
    def layers(self) -> int:
        return len(self.headers)


def encapsulate(d: Datagram, src: Address, dst: Address, max_depth: int = MAX_ENCAP_DEPTH) -> Datagram:
    if len(d.headers) + 1 > max_depth:
        raise EncapDepthExceeded(f"datagram {d.id} would carry {len(d.headers) + 1} headers")
    return Datagram((Header(src, dst),) + d.headers, d.body, d.id)


def decapsulate(d: Datagram) -> Datagram:
    if len(d.headers) < 2:
        raise NoInnerHeader(f"datagram {d.id} has no inner header")
    return Datagram(d.headers[1:], d.body, d.id)


def body_bytes(body: MessageBody) -> int:
    if isinstance(body, Data):
        return body.payload_bytes
    return CONTROL_BODY_BYTES


def wire_size(d: Datagram) -> int:
    return body_bytes(d.body) + HEADER_BYTES * len(d.headers)
