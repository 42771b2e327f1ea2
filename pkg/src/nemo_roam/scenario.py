"""Line-oriented scenario files.

One directive per line, ``#`` starts a comment::

    mode bs|ro
    seed <u64>
    tend <ms>
    node <name> kind=cn|router|ha|ar|mr|mnn [addr=<hex32>] [prefix=<hex32>/<len>]
         [ha=<name>] [mr=<name>] [parent=<mr-name>]
         [visitors=allow|deny] [ro-deny=<cn>[,<cn>...]]
    link <a> <b> delay=<ms>
    at <ms> attach <mr> <ar>
    at <ms> send <src> <dst> bytes=<n> count=<k> interval=<ms>

``send`` runs between a CN and an MNN in either direction.  ``visitors`` and
``ro-deny`` are home-agent policies.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from typing import Dict, List, Optional, Tuple, Union

from .netmodel import Address, Prefix

MODES = ("bs", "ro")
KINDS = ("cn", "router", "ha", "ar", "mr", "mnn")
U64_MAX = (1 << 64) - 1
DEFAULT_T_END = 10_000


class ParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class NodeSpec:
    name: str
    kind: str
    addr: Optional[Address] = None
    prefix: Optional[Prefix] = None
    ha: Optional[str] = None
    mr: Optional[str] = None
    parent: Optional[str] = None
    visitors: Optional[str] = None
    ro_deny: Tuple[str, ...] = ()


@dataclass(frozen=True)
class LinkSpec:
    a: str
    b: str
    delay_ms: int


@dataclass(frozen=True)
class AttachDirective:
    at_ms: int
    mr: str
    ar: str


@dataclass(frozen=True)
class SendDirective:
    at_ms: int
    src: str
    dst: str
    bytes: int
    count: int = 1
    interval_ms: int = 0


Directive = Union[AttachDirective, SendDirective]


@dataclass(frozen=True)
class ScenarioSpec:
    mode: str
    seed: int
    t_end_ms: int = DEFAULT_T_END
    nodes: Tuple[NodeSpec, ...] = ()
    links: Tuple[LinkSpec, ...] = ()
    schedule: Tuple[Directive, ...] = ()

    def node(self, name: str) -> NodeSpec:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def with_mode(self, mode: str) -> "ScenarioSpec":
        spec = replace(self, mode=mode)
        validate(spec)
        return spec

    @property
    def sends(self) -> List[SendDirective]:
        return [d for d in self.schedule if isinstance(d, SendDirective)]


def _int(lineno: int, text: str, what: str, minimum: int = 0) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise ParseError(lineno, f"{what} must be an integer, got {text!r}") from None
    if value < minimum:
        raise ParseError(lineno, f"{what} must be >= {minimum}")
    return value


def _options(lineno: int, tokens: List[str], allowed: Tuple[str, ...]) -> Dict[str, str]:
    opts: Dict[str, str] = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or key not in allowed:
            raise ParseError(lineno, f"unexpected option {tok!r}")
        if key in opts:
            raise ParseError(lineno, f"option {key!r} given twice")
        opts[key] = value
    return opts


def parse_scenario(text: str) -> ScenarioSpec:
    mode = seed = t_end = None
    nodes: List[NodeSpec] = []
    links: List[LinkSpec] = []
    schedule: List[Directive] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        head, args = tokens[0], tokens[1:]
        if head == "mode":
            if len(args) != 1 or args[0] not in MODES:
                raise ParseError(lineno, "mode must be 'bs' or 'ro'")
            mode = args[0]
        elif head == "seed":
            if len(args) != 1:
                raise ParseError(lineno, "seed takes one value")
            seed = _int(lineno, args[0], "seed")
            if seed > U64_MAX:
                raise ParseError(lineno, "seed exceeds 64 bits")
        elif head == "tend":
            if len(args) != 1:
                raise ParseError(lineno, "tend takes one value")
            t_end = _int(lineno, args[0], "tend")
        elif head == "node":
            nodes.append(_parse_node(lineno, args))
        elif head == "link":
            if len(args) != 3:
                raise ParseError(lineno, "usage: link <a> <b> delay=<ms>")
            opts = _options(lineno, args[2:], ("delay",))
            if "delay" not in opts:
                raise ParseError(lineno, "link needs delay=<ms>")
            links.append(LinkSpec(args[0], args[1], _int(lineno, opts["delay"], "delay", 1)))
        elif head == "at":
            schedule.append(_parse_at(lineno, args))
        else:
            raise ParseError(lineno, f"unknown directive {head!r}")
    if mode is None:
        raise ParseError(0, "missing mandatory 'mode' directive")
    if seed is None:
        raise ParseError(0, "missing mandatory 'seed' directive")
    spec = ScenarioSpec(mode, seed, DEFAULT_T_END if t_end is None else t_end,
                        tuple(nodes), tuple(links), tuple(schedule))
    validate(spec)
    return spec


def _parse_node(lineno: int, args: List[str]) -> NodeSpec:
    if not args:
        raise ParseError(lineno, "node needs a name")
    name = args[0]
    opts = _options(lineno, args[1:], ("kind", "addr", "prefix", "ha", "mr", "parent", "visitors", "ro-deny"))
    kind = opts.get("kind")
    if kind not in KINDS:
        raise ParseError(lineno, f"node {name}: kind must be one of {', '.join(KINDS)}")
    try:
        addr = Address.parse(opts["addr"]) if "addr" in opts else None
        prefix = Prefix.parse(opts["prefix"]) if "prefix" in opts else None
    except ValueError as exc:
        raise ParseError(lineno, f"node {name}: {exc}") from None
    visitors = opts.get("visitors")
    if visitors is not None and visitors not in ("allow", "deny"):
        raise ParseError(lineno, "visitors must be 'allow' or 'deny'")
    ro_deny = tuple(opts["ro-deny"].split(",")) if "ro-deny" in opts else ()
    return NodeSpec(name, kind, addr, prefix, opts.get("ha"), opts.get("mr"), opts.get("parent"),
                    visitors, ro_deny)


def _parse_at(lineno: int, args: List[str]) -> Directive:
    if len(args) < 2:
        raise ParseError(lineno, "usage: at <ms> attach|send ...")
    at = _int(lineno, args[0], "time")
    verb, rest = args[1], args[2:]
    if verb == "attach":
        if len(rest) != 2:
            raise ParseError(lineno, "usage: at <ms> attach <mr> <ar>")
        return AttachDirective(at, rest[0], rest[1])
    if verb == "send":
        if len(rest) < 2:
            raise ParseError(lineno, "usage: at <ms> send <src> <dst> bytes=<n> count=<k> interval=<ms>")
        opts = _options(lineno, rest[2:], ("bytes", "count", "interval"))
        if "bytes" not in opts:
            raise ParseError(lineno, "send needs bytes=<n>")
        return SendDirective(
            at, rest[0], rest[1],
            bytes=_int(lineno, opts["bytes"], "bytes"),
            count=_int(lineno, opts.get("count", "1"), "count", 1),
            interval_ms=_int(lineno, opts.get("interval", "0"), "interval"),
        )
    raise ParseError(lineno, f"unknown action {verb!r}")


def validate(spec: ScenarioSpec) -> None:
    if spec.mode not in MODES:
        raise ValidationError(f"unknown mode {spec.mode!r}")
    by_name: Dict[str, NodeSpec] = {}
    for n in spec.nodes:
        if n.name in by_name:
            raise ValidationError(f"duplicate node {n.name}")
        by_name[n.name] = n

    def ref(owner: str, name: Optional[str], kind: str) -> NodeSpec:
        target = by_name.get(name) if name else None
        if target is None or target.kind != kind:
            raise ValidationError(f"node {owner}: {kind} reference {name!r} does not name a {kind} node")
        return target

    addrs: Dict[Address, str] = {}
    for n in spec.nodes:
        if n.addr is not None:
            if n.addr in addrs:
                raise ValidationError(f"nodes {addrs[n.addr]} and {n.name} share an address")
            addrs[n.addr] = n.name
        if n.kind != "ha" and (n.visitors is not None or n.ro_deny):
            raise ValidationError(f"node {n.name}: policies only apply to home agents")
        for cn in n.ro_deny:
            ref(n.name, cn, "cn")
        if n.kind == "mr":
            ref(n.name, n.ha, "ha")
            if n.prefix is None:
                raise ValidationError(f"mobile router {n.name} needs its mobile network prefix")
            if n.parent is not None:
                ref(n.name, n.parent, "mr")
                if n.parent == n.name:
                    raise ValidationError(f"mobile router {n.name} cannot nest in itself")
        elif n.parent is not None:
            raise ValidationError(f"node {n.name}: only mobile routers take parent=")
        if n.kind == "mnn":
            ref(n.name, n.mr, "mr")
        elif n.mr is not None:
            raise ValidationError(f"node {n.name}: only mnn nodes take mr=")
        if n.kind != "mr" and n.ha is not None:
            raise ValidationError(f"node {n.name}: only mobile routers take ha=")
        if n.kind == "ar" and n.prefix is None:
            raise ValidationError(f"access router {n.name} needs an advertised prefix")
    if spec.mode == "ro" and any(n.parent for n in spec.nodes):
        raise ValidationError("route optimisation is not defined for nested mobile networks; use mode bs")

    seen = set()
    for link in spec.links:
        for end in (link.a, link.b):
            if end not in by_name:
                raise ValidationError(f"link {link.a}-{link.b}: unknown node {end}")
        key = frozenset((link.a, link.b))
        if link.a == link.b or key in seen:
            raise ValidationError(f"link {link.a}-{link.b} is a self-loop or duplicate")
        if link.delay_ms < 1:
            raise ValidationError(f"link {link.a}-{link.b}: delay must be >= 1")
        seen.add(key)

    for d in spec.schedule:
        if isinstance(d, AttachDirective):
            mr = ref("attach", d.mr, "mr")
            target = by_name.get(d.ar)
            if target is None or target.kind not in ("ar", "mr"):
                raise ValidationError(f"attach {d.mr}: {d.ar!r} is not an access router")
            if target.kind == "mr" and mr.parent != target.name:
                raise ValidationError(f"attach {d.mr}: may only nest under its parent {mr.parent!r}")
            if frozenset((d.mr, d.ar)) not in seen:
                raise ValidationError(f"attach {d.mr} {d.ar}: no link between them")
        else:
            ends = [by_name.get(d.src), by_name.get(d.dst)]
            if None in ends or sorted(e.kind for e in ends) != ["cn", "mnn"]:
                raise ValidationError(f"send {d.src} {d.dst}: traffic runs between a cn and an mnn")


def _fmt_node(n: NodeSpec) -> str:
    parts = ["node", n.name, f"kind={n.kind}"]
    if n.addr is not None:
        parts.append(f"addr={n.addr}")
    if n.prefix is not None:
        parts.append(f"prefix={n.prefix}")
    for key in ("ha", "mr", "parent", "visitors"):
        value = getattr(n, key)
        if value is not None:
            parts.append(f"{key}={value}")
    if n.ro_deny:
        parts.append("ro-deny=" + ",".join(n.ro_deny))
    return " ".join(parts)


def serialize_scenario(spec: ScenarioSpec) -> str:
    lines = [f"mode {spec.mode}", f"seed {spec.seed}", f"tend {spec.t_end_ms}"]
    lines += [_fmt_node(n) for n in spec.nodes]
    lines += [f"link {l.a} {l.b} delay={l.delay_ms}" for l in spec.links]
    for d in spec.schedule:
        if isinstance(d, AttachDirective):
            lines.append(f"at {d.at_ms} attach {d.mr} {d.ar}")
        else:
            lines.append(f"at {d.at_ms} send {d.src} {d.dst} bytes={d.bytes} "
                         f"count={d.count} interval={d.interval_ms}")
    return "\n".join(lines) + "\n"


def canned_names() -> List[str]:
    files = resources.files("nemo_roam").joinpath("scenarios")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".nemo"))


def canned_text(name: str) -> str:
    path = resources.files("nemo_roam").joinpath("scenarios", f"{name}.nemo")
    if not path.is_file():
        raise KeyError(f"no shipped scenario named {name!r}")
    return path.read_text()


def load_canned(name: str) -> ScenarioSpec:
    return parse_scenario(canned_text(name))

