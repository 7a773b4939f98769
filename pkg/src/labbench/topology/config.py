"""Topology file dialect: a strict IOS-like subset plus link/vm/service stanzas.

The reader is line oriented and indentation insensitive. Unknown keywords are
errors carrying the line number; nothing is skipped silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from ipaddress import AddressValueError, IPv4Address, IPv4Interface, NetmaskValueError
from typing import NamedTuple

from ..cloud_specs import SERVICE_KINDS, ResponseRule, ServiceSpec, VmSpec
from ..errors import DanglingLinkEndpoint, DuplicateDevice, ParseError
from ..units import (
    format_bandwidth,
    format_duration,
    format_number,
    parse_bandwidth,
    parse_bytes,
    parse_duration,
)

DEVICE_KINDS = ("router", "switch", "server", "host")
L3_KINDS = ("router", "server", "host")
DEFAULT_QUEUE = 64


@dataclass(frozen=True)
class Encapsulation:
    vlan_id: int
    native: bool = False


@dataclass(frozen=True)
class InterfaceConfig:
    name: str
    mode: str = "routed"  # routed | access | trunk
    encapsulation: Encapsulation | None = None
    ip: IPv4Interface | None = None
    allowed_vlans: frozenset[int] = frozenset()
    access_vlan: int | None = None

    @property
    def is_subinterface(self) -> bool:
        return "." in self.name

    @property
    def parent(self) -> str:
        return self.name.split(".", 1)[0]


@dataclass(frozen=True)
class DeviceConfig:
    name: str
    kind: str
    interfaces: tuple[InterfaceConfig, ...] = ()
    cores: int | None = None
    ram: int | None = None
    disk_rate: float | None = None

    def interface(self, name: str) -> InterfaceConfig | None:
        for iface in self.interfaces:
            if iface.name == name:
                return iface
        return None

    def subinterfaces(self, parent: str) -> list[InterfaceConfig]:
        return [i for i in self.interfaces if i.is_subinterface and i.parent == parent]

    @property
    def is_l3(self) -> bool:
        return self.kind in L3_KINDS


class Endpoint(NamedTuple):
    device: str
    interface: str

    def __str__(self) -> str:
        return f"{self.device}:{self.interface}"


@dataclass(frozen=True)
class LinkSpec:
    a: Endpoint
    b: Endpoint
    bandwidth: float
    prop_delay: float = 0.0
    queue_capacity: int = DEFAULT_QUEUE

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("link bandwidth must be positive")
        if self.prop_delay < 0 or self.queue_capacity < 0:
            raise ValueError("link delay and queue must be non-negative")

    @property
    def name(self) -> str:
        return f"{self.a}<->{self.b}"


@dataclass(frozen=True)
class TopologyDoc:
    """Everything a topology file declares."""

    devices: tuple[DeviceConfig, ...] = ()
    links: tuple[LinkSpec, ...] = ()
    vms: tuple[VmSpec, ...] = ()

    def device(self, name: str) -> DeviceConfig | None:
        for dev in self.devices:
            if dev.name == name:
                return dev
        return None

    def vm(self, name: str) -> VmSpec | None:
        for vm in self.vms:
            if vm.name == name:
                return vm
        return None


# ---------------------------------------------------------------- parsing


def parse_vlan_list(text: str) -> frozenset[int]:
    """``"100-102"`` -> {100, 101, 102}; ``"100,102"`` -> {100, 102}."""
    vlans: set[int] = set()
    for part in text.replace(" ", "").split(","):
        if not part:
            raise ValueError("empty element in vlan list")
        lo, sep, hi = part.partition("-")
        start = _vlan_id(lo)
        stop = _vlan_id(hi) if sep else start
        if stop < start:
            raise ValueError(f"descending vlan range {part!r}")
        vlans.update(range(start, stop + 1))
    return frozenset(vlans)


def format_vlan_list(vlans) -> str:
    ordered = sorted(vlans)
    parts = []
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and ordered[j + 1] == ordered[j] + 1:
            j += 1
        parts.append(str(ordered[i]) if i == j else f"{ordered[i]}-{ordered[j]}")
        i = j + 1
    return ",".join(parts)


def _vlan_id(token: str) -> int:
    if not token.isdigit():
        raise ValueError(f"vlan id {token!r} is not a number")
    vid = int(token)
    if not 1 <= vid <= 4094:
        raise ValueError(f"vlan id {vid} outside 1-4094")
    return vid


def _pairs(tokens: list[str], required: tuple[str, ...], optional: tuple[str, ...] = ()) -> dict[str, str]:
    if len(tokens) % 2:
        raise ValueError("expected keyword/value pairs")
    out: dict[str, str] = {}
    for key, value in zip(tokens[::2], tokens[1::2]):
        if key not in required and key not in optional:
            raise ValueError(f"unknown keyword {key!r}")
        if key in out:
            raise ValueError(f"{key!r} given twice")
        out[key] = value
    missing = [k for k in required if k not in out]
    if missing:
        raise ValueError(f"missing {', '.join(missing)}")
    return out


def _endpoint(token: str) -> Endpoint:
    dev, sep, iface = token.partition(":")
    if not sep or not dev or not iface:
        raise ValueError(f"endpoint {token!r} is not <device>:<interface>")
    return Endpoint(dev, iface)


def _nonneg_float(token: str, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ValueError(f"{what} {token!r} is not a number") from None
    if value < 0 or value != value:
        raise ValueError(f"{what} must be non-negative")
    return value


def _positive_int(token: str, what: str) -> int:
    if not token.isdigit() or int(token) <= 0:
        raise ValueError(f"{what} must be a positive integer, got {token!r}")
    return int(token)


class _IfaceBuilder:
    def __init__(self, name: str, line: int):
        self.name = name
        self.line = line
        self.mode: str | None = None
        self.encapsulation: Encapsulation | None = None
        self.ip: IPv4Interface | None = None
        self.allowed: frozenset[int] = frozenset()
        self.access_vlan: int | None = None


class _DeviceBuilder:
    def __init__(self, name: str, kind: str, line: int):
        self.name = name
        self.kind = kind
        self.line = line
        self.interfaces: list[_IfaceBuilder] = []
        self.cores: int | None = None
        self.ram: int | None = None
        self.disk_rate: float | None = None

    def finish(self, source: str) -> DeviceConfig:
        names: dict[str, _IfaceBuilder] = {}
        natives: dict[str, int] = {}
        built = []
        for ib in self.interfaces:
            if ib.name in names:
                raise ParseError(ib.line, f"interface {ib.name} declared twice on {self.name}", source)
            names[ib.name] = ib
        for ib in self.interfaces:
            fail = lambda reason, ib=ib: ParseError(ib.line, reason, source)  # noqa: E731
            is_sub = "." in ib.name
            if is_sub:
                parent = ib.name.split(".", 1)[0]
                if parent not in names:
                    raise fail(f"subinterface {ib.name} has no parent interface {parent}")
                if ib.encapsulation is None:
                    raise fail(f"subinterface {ib.name} lacks 'encapsulation dot1q'")
                if ib.encapsulation.native:
                    natives[parent] = natives.get(parent, 0) + 1
                    if natives[parent] > 1:
                        raise fail(f"second native subinterface on {parent}")
            if self.kind == "switch":
                mode = ib.mode or "access"
                if ib.ip is not None and not ib.name.lower().startswith("vlan"):
                    raise fail("switch ports cannot carry routed addresses (only Vlan management interfaces)")
                if is_sub:
                    raise fail("switches have no subinterfaces")
            else:
                mode = "routed"
            if (mode == "trunk") != bool(ib.allowed):
                raise fail("'switchport trunk allowed vlan' requires trunk mode and vice versa")
            if ib.access_vlan is not None and mode != "access":
                raise fail("'switchport access vlan' on a non-access port")
            built.append(
                InterfaceConfig(ib.name, mode, ib.encapsulation, ib.ip, ib.allowed, ib.access_vlan)
            )
        if self.kind != "server" and (self.cores or self.ram or self.disk_rate):
            raise ParseError(self.line, f"cores/ram/disk only apply to servers ({self.name})", source)
        return DeviceConfig(self.name, self.kind, tuple(built), self.cores, self.ram, self.disk_rate)


def parse_topology(text: str, source: str = "<string>") -> TopologyDoc:
    """Parse a topology document into devices, links and VMs."""
    devices: list[DeviceConfig] = []
    device_lines: dict[str, int] = {}
    links: list[tuple[int, LinkSpec]] = []
    vms: dict[str, tuple[int, dict]] = {}
    services: list[tuple[int, str, ServiceSpec]] = []
    dev: _DeviceBuilder | None = None
    iface: _IfaceBuilder | None = None

    def close_device():
        nonlocal dev, iface
        if dev is not None:
            devices.append(dev.finish(source))
        dev, iface = None, None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0].lower()
        try:
            if key == "device":
                if len(tok) != 3 or tok[2] not in DEVICE_KINDS:
                    raise ValueError("expected 'device <name> <router|switch|server|host>'")
                close_device()
                if tok[1] in device_lines:
                    raise DuplicateDevice(lineno, f"device {tok[1]} already declared on line {device_lines[tok[1]]}", source)
                device_lines[tok[1]] = lineno
                dev = _DeviceBuilder(tok[1], tok[2], lineno)
            elif key == "interface":
                if dev is None:
                    raise ValueError("'interface' outside a device block")
                if len(tok) != 2 or tok[1].count(".") > 1:
                    raise ValueError("expected 'interface <name>' with at most one '.'")
                iface = _IfaceBuilder(tok[1], lineno)
                dev.interfaces.append(iface)
            elif key == "encapsulation":
                _need_iface(iface)
                if len(tok) not in (3, 4) or tok[1].lower() != "dot1q" or (len(tok) == 4 and tok[3] != "native"):
                    raise ValueError("expected 'encapsulation dot1q <id> [native]'")
                if "." not in iface.name:
                    raise ValueError("encapsulation is only valid on a subinterface")
                iface.encapsulation = Encapsulation(_vlan_id(tok[2]), len(tok) == 4)
            elif key == "ip":
                _need_iface(iface)
                if len(tok) != 4 or tok[1] != "address":
                    raise ValueError("expected 'ip address <a.b.c.d> <mask>'")
                if not dev.kind in L3_KINDS and not iface.name.lower().startswith("vlan"):
                    raise ValueError("switch ports cannot carry routed addresses")
                try:
                    iface.ip = IPv4Interface(f"{tok[2]}/{tok[3]}")
                except (AddressValueError, NetmaskValueError, ValueError) as exc:
                    raise ValueError(f"bad address/mask: {exc}") from None
            elif key == "switchport":
                _need_iface(iface)
                if dev.kind != "switch":
                    raise ValueError("'switchport' is only valid on switch interfaces")
                _switchport(iface, tok)
            elif key in ("cores", "ram", "disk"):
                if dev is None or dev.kind != "server":
                    raise ValueError(f"'{key}' is only valid inside a server block")
                if len(tok) != 2:
                    raise ValueError(f"expected '{key} <value>'")
                if key == "cores":
                    dev.cores = _positive_int(tok[1], "cores")
                elif key == "ram":
                    dev.ram = parse_bytes(tok[1])
                else:
                    dev.disk_rate = float(parse_bytes(tok[1]))
                if (dev.ram is not None and dev.ram <= 0) or (dev.disk_rate is not None and dev.disk_rate <= 0):
                    raise ValueError(f"{key} must be positive")
            elif key == "link":
                close_device()
                if len(tok) < 3:
                    raise ValueError("expected 'link <dev>:<iface> <dev>:<iface> bandwidth ...'")
                a, b = _endpoint(tok[1]), _endpoint(tok[2])
                opts = _pairs(tok[3:], ("bandwidth",), ("delay", "queue"))
                bw = parse_bandwidth(opts["bandwidth"])
                if bw <= 0:
                    raise ValueError("bandwidth must be positive")
                queue = opts.get("queue", str(DEFAULT_QUEUE))
                if not queue.isdigit():
                    raise ValueError("queue must be a non-negative integer")
                links.append((lineno, LinkSpec(a, b, bw, parse_duration(opts.get("delay", "0s")), int(queue))))
            elif key == "vm":
                close_device()
                if len(tok) < 2:
                    raise ValueError("expected 'vm <name> host <server> cores <n> ram <bytes> ip <addr>'")
                name = tok[1]
                if name in vms:
                    raise ValueError(f"vm {name} declared twice")
                opts = _pairs(tok[2:], ("host", "cores", "ram", "ip"))
                vms[name] = (lineno, {
                    "host": opts["host"],
                    "alloc_cores": _positive_int(opts["cores"], "cores"),
                    "alloc_ram": parse_bytes(opts["ram"]),
                    "address": IPv4Address(opts["ip"]),
                })
            elif key == "service":
                close_device()
                if len(tok) < 4:
                    raise ValueError("expected 'service <vm> <name> <db|file> ...'")
                if tok[3] not in SERVICE_KINDS:
                    raise ValueError(f"service kind must be db or file, got {tok[3]!r}")
                opts = _pairs(tok[4:], ("cpu_fixed", "cpu_per_byte", "footprint"), ("resp",))
                rule = None
                if "resp" in opts:
                    rkind, sep, rval = opts["resp"].partition(":")
                    if not sep or rkind not in ("fixed", "mult"):
                        raise ValueError("resp must be fixed:<bytes> or mult:<x>")
                    rule = ResponseRule(rkind, parse_bytes(rval) if rkind == "fixed" else _nonneg_float(rval, "multiplier"))
                svc = ServiceSpec(
                    tok[2], tok[3],
                    _nonneg_float(opts["cpu_fixed"], "cpu_fixed"),
                    _nonneg_float(opts["cpu_per_byte"], "cpu_per_byte"),
                    parse_bytes(opts["footprint"]),
                    rule,
                )
                services.append((lineno, tok[1], svc))
            else:
                raise ValueError(f"unknown keyword {tok[0]!r}")
        except ParseError:
            raise
        except (ValueError, AddressValueError) as exc:
            raise ParseError(lineno, str(exc), source) from None
    close_device()

    by_name = {d.name: d for d in devices}
    used: dict[Endpoint, int] = {}
    for lineno, link in links:
        for ep in (link.a, link.b):
            d = by_name.get(ep.device)
            if d is None:
                raise DanglingLinkEndpoint(lineno, f"link endpoint {ep}: no device {ep.device}", source)
            if d.interface(ep.interface) is None:
                raise DanglingLinkEndpoint(lineno, f"link endpoint {ep}: no such interface", source)
            if "." in ep.interface:
                raise ParseError(lineno, f"link endpoint {ep} must be a physical interface", source)
            if ep in used:
                raise ParseError(lineno, f"interface {ep} already linked on line {used[ep]}", source)
            used[ep] = lineno

    vm_services: dict[str, list[ServiceSpec]] = {name: [] for name in vms}
    for lineno, vm_name, svc in services:
        if vm_name not in vms:
            raise ParseError(lineno, f"service {svc.name} names unknown vm {vm_name}", source)
        if any(s.name == svc.name for s in vm_services[vm_name]):
            raise ParseError(lineno, f"service {svc.name} declared twice on {vm_name}", source)
        vm_services[vm_name].append(svc)
    built_vms = []
    for name, (lineno, fields_) in vms.items():
        if name in by_name:
            raise ParseError(lineno, f"vm {name} reuses a device name", source)
        built_vms.append(VmSpec(name, services=tuple(vm_services[name]), **fields_))

    return TopologyDoc(tuple(devices), tuple(link for _, link in links), tuple(built_vms))


def _need_iface(iface):
    if iface is None:
        raise ValueError("interface statement outside an 'interface' block")


def _switchport(iface: _IfaceBuilder, tok: list[str]) -> None:
    words = [t.lower() for t in tok]
    if len(tok) == 3 and words[1] == "mode" and words[2] in ("trunk", "access"):
        iface.mode = words[2]
    elif len(tok) == 5 and words[1:4] == ["trunk", "allowed", "vlan"]:
        iface.allowed = parse_vlan_list(tok[4])
    elif len(tok) > 5 and words[1:4] == ["trunk", "allowed", "vlan"]:
        iface.allowed = parse_vlan_list("".join(tok[4:]))
    elif len(tok) == 4 and words[1:3] == ["access", "vlan"]:
        iface.access_vlan = _vlan_id(tok[3])
    else:
        raise ValueError("unrecognized switchport statement")


# ---------------------------------------------------------------- emission


def emit_topology(doc: TopologyDoc) -> str:
    """Canonical text for ``doc``; ``parse_topology(emit_topology(d)) == d``."""
    out: list[str] = []
    for dev in doc.devices:
        out.append(f"device {dev.name} {dev.kind}")
        if dev.cores is not None:
            out.append(f" cores {dev.cores}")
        if dev.ram is not None:
            out.append(f" ram {dev.ram}")
        if dev.disk_rate is not None:
            out.append(f" disk {format_number(dev.disk_rate)}")
        for iface in dev.interfaces:
            out.append(f"interface {iface.name}")
            if iface.encapsulation is not None:
                native = " native" if iface.encapsulation.native else ""
                out.append(f" encapsulation dot1q {iface.encapsulation.vlan_id}{native}")
            if iface.ip is not None:
                out.append(f" ip address {iface.ip.ip} {iface.ip.netmask}")
            if dev.kind == "switch":
                out.append(f" switchport mode {iface.mode}")
                if iface.mode == "trunk":
                    out.append(f" switchport trunk allowed vlan {format_vlan_list(iface.allowed_vlans)}")
                if iface.access_vlan is not None:
                    out.append(f" switchport access vlan {iface.access_vlan}")
        out.append("")
    for link in doc.links:
        out.append(
            f"link {link.a} {link.b} bandwidth {format_bandwidth(link.bandwidth)}"
            f" delay {format_duration(link.prop_delay)} queue {link.queue_capacity}"
        )
    if doc.links:
        out.append("")
    for vm in doc.vms:
        out.append(f"vm {vm.name} host {vm.host} cores {vm.alloc_cores} ram {vm.alloc_ram} ip {vm.address}")
        for svc in vm.services:
            line = (
                f"service {vm.name} {svc.name} {svc.kind} cpu_fixed {format_number(svc.cpu_fixed)}"
                f" cpu_per_byte {format_number(svc.cpu_per_byte)} footprint {svc.ram_footprint}"
            )
            if svc.response_rule is not None:
                r = svc.response_rule
                line += f" resp {r.kind}:{format_number(r.value)}"
            out.append(line)
    while out and out[-1] == "":
        out.pop()
    return "\n".join(out) + ("\n" if out else "")
