"""Validated L2/L3 model: VLAN broadcast domains, subnets and the L2 graph.

Broadcast domains come from a union-find over *keys*: an L3 interface is
``("if", device, interface)`` and a switch's VLAN is ``("sw", switch, vlan)``.
Each link joins the keys its two sides carry under a common label, where a
label is a VLAN id or ``"U"`` for untagged frames.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Interface, IPv4Network

from ..errors import ValidationError
from .config import DeviceConfig, Endpoint, LinkSpec, TopologyDoc

UNTAGGED = "U"


@dataclass(frozen=True)
class Segment:
    """One broadcast domain that contains at least one addressed L3 interface."""

    index: int
    vlan: int | None
    members: tuple[tuple[str, str], ...]  # (device, interface) with an address


@dataclass
class NetworkModel:
    doc: TopologyDoc
    devices: dict[str, DeviceConfig]
    links: tuple[LinkSpec, ...]
    vlan_domains: dict[int, frozenset[tuple[str, str]]]
    subnets: dict[IPv4Network, frozenset[tuple[str, str, IPv4Address]]]
    segments: tuple[Segment, ...]
    # (device, interface) -> segment index, for addressed L3 interfaces
    segment_of: dict[tuple[str, str], int]
    # key -> [(neighbour key, link index, direction 0=a->b / 1=b->a)]
    l2_adjacency: dict[tuple, list[tuple[tuple, int, int]]]
    # int(address) -> (device, interface); VM addresses map to their host's interface
    addr_owner: dict[int, tuple[str, str]]
    vm_by_address: dict[int, str]
    warnings: list[str] = field(default_factory=list)

    @property
    def vms(self):
        return self.doc.vms

    def l3_interfaces(self, device: str) -> list[tuple[str, IPv4Interface]]:
        dev = self.devices[device]
        return [(i.name, i.ip) for i in dev.interfaces if i.ip is not None] if dev.is_l3 else []

    def primary_address(self, device: str) -> IPv4Address | None:
        addrs = self.l3_interfaces(device)
        return addrs[0][1].ip if addrs else None

    def link_index(self, endpoint: Endpoint) -> int | None:
        for idx, link in enumerate(self.links):
            if endpoint in (link.a, link.b):
                return idx
        return None

    def l2_path(self, src: tuple[str, str], dst: tuple[str, str], down=frozenset()) -> tuple[tuple[int, int], ...] | None:
        """Shortest (fewest links) path of ``(link, direction)`` hops between two L3 interfaces."""
        start, goal = ("if", *src), ("if", *dst)
        if start == goal:
            return ()
        prev: dict[tuple, tuple] = {start: None}
        todo = deque([start])
        while todo:
            key = todo.popleft()
            for nbr, link, direction in self.l2_adjacency.get(key, ()):
                if link in down or nbr in prev:
                    continue
                prev[nbr] = (key, link, direction)
                if nbr == goal:
                    hops = []
                    while prev[nbr] is not None:
                        nbr, link, direction = prev[nbr]
                        hops.append((link, direction))
                    return tuple(reversed(hops))
                # only switch VLAN keys forward frames onward
                if nbr[0] == "sw":
                    todo.append(nbr)
        return None


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        self.add(x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # deterministic root choice
            if repr(rb) < repr(ra):
                ra, rb = rb, ra
            self.parent[rb] = ra


def _side_labels(dev: DeviceConfig, phys: str, errors: list[str]) -> dict:
    iface = dev.interface(phys)
    if dev.kind == "switch":
        if iface.mode == "trunk":
            return {v: ("sw", dev.name, v) for v in sorted(iface.allowed_vlans)}
        vlan = iface.access_vlan or 1
        key = ("sw", dev.name, vlan)
        return {vlan: key, UNTAGGED: key}
    labels: dict = {}
    if iface.ip is not None:
        labels[UNTAGGED] = ("if", dev.name, phys)
    for sub in dev.subinterfaces(phys):
        key = ("if", dev.name, sub.name)
        labels[sub.encapsulation.vlan_id] = key
        if sub.encapsulation.native:
            if iface.ip is not None:
                errors.append(
                    f"native-VLAN conflict on {dev.name}:{phys}: untagged address and native subinterface {sub.name}"
                )
            else:
                labels[UNTAGGED] = key
    return labels


def build_network(doc: TopologyDoc) -> NetworkModel:
    """Compute broadcast domains and subnets; raise :class:`ValidationError` on bad models."""
    errors: list[str] = []
    warnings: list[str] = []
    devices = {d.name: d for d in doc.devices}
    uf = _UnionFind()
    adjacency: dict[tuple, list] = {}

    for dev in doc.devices:
        for iface in dev.interfaces:
            if dev.is_l3:
                uf.add(("if", dev.name, iface.name))

    linked: set[Endpoint] = set()
    for idx, link in enumerate(doc.links):
        linked.update((link.a, link.b))
        da, db = devices[link.a.device], devices[link.b.device]
        la = _side_labels(da, link.a.interface, errors)
        lb = _side_labels(db, link.b.interface, errors)
        for label in sorted(set(la) & set(lb), key=str):
            ka, kb = la[label], lb[label]
            uf.union(ka, kb)
            adjacency.setdefault(ka, []).append((kb, idx, 0))
            adjacency.setdefault(kb, []).append((ka, idx, 1))
        for mine, theirs, ep, peer in ((la, lb, link.a, link.b), (lb, la, link.b, link.a)):
            dev = devices[ep.device]
            if not dev.is_l3:
                continue
            for label, key in mine.items():
                if label in theirs:
                    continue
                if label == UNTAGGED:
                    # a native subinterface may still match by VLAN id
                    if key[2] != ep.interface:
                        continue
                    errors.append(f"untagged interface {ep} faces {peer}, which carries no untagged frames")
                elif not (dev.interface(key[2]).encapsulation.native and UNTAGGED in theirs):
                    errors.append(
                        f"VLAN {label} configured on subinterface {ep.device}:{key[2]} "
                        f"but not allowed on the path via {peer}"
                    )
        nat_a = _native_vlan(da, link.a.interface)
        nat_b = _native_vlan(db, link.b.interface)
        if nat_a is not None and nat_b is not None and nat_a != nat_b:
            errors.append(f"native VLAN mismatch on link {link.a}-{link.b}: {nat_a} vs {nat_b}")

    for dev in doc.devices:
        if not dev.is_l3:
            continue
        for iface in dev.interfaces:
            phys = iface.parent
            if Endpoint(dev.name, phys) in linked:
                continue
            if iface.is_subinterface:
                errors.append(
                    f"VLAN {iface.encapsulation.vlan_id} configured on subinterface {dev.name}:{iface.name} "
                    f"but not allowed on any trunk path (interface in no link)"
                )
            elif iface.ip is not None:
                warnings.append(f"interface {dev.name}:{iface.name} is in no link")

    # broadcast domains
    components: dict = {}
    for key in list(uf.parent):
        components.setdefault(uf.find(key), []).append(key)

    vlan_members: dict[int, set[tuple[str, str]]] = {}
    for dev in doc.devices:
        for iface in dev.interfaces:
            if dev.kind == "switch":
                carried = iface.allowed_vlans if iface.mode == "trunk" else {iface.access_vlan or 1}
                if iface.mode == "access" and iface.access_vlan is None and Endpoint(dev.name, iface.name) not in linked:
                    continue
                for v in carried:
                    vlan_members.setdefault(v, set()).add((dev.name, iface.name))
            elif iface.encapsulation is not None:
                vlan_members.setdefault(iface.encapsulation.vlan_id, set()).add((dev.name, iface.name))
    segments: list[Segment] = []
    segment_of: dict[tuple[str, str], int] = {}
    for root in sorted(components, key=repr):
        keys = components[root]
        vlans = sorted({k[2] for k in keys if k[0] == "sw"})
        l3 = sorted(
            (k[1], k[2]) for k in keys
            if k[0] == "if" and devices[k[1]].interface(k[2]).ip is not None
        )
        for v in vlans:
            vlan_members.setdefault(v, set()).update((d, i) for d, i in l3)
        if not l3:
            continue
        vlan = vlans[0] if vlans else None
        if vlan is None:
            tags = {devices[d].interface(i).encapsulation for d, i in l3} - {None}
            vlan = min((t.vlan_id for t in tags), default=None)
        seg = Segment(len(segments), vlan, tuple(l3))
        segments.append(seg)
        for member in l3:
            segment_of[member] = seg.index

    # subnets and address ownership
    subnets: dict[IPv4Network, set] = {}
    owner: dict[int, tuple[str, str]] = {}

    def claim(addr: IPv4Address, net: IPv4Network, dev: str, iface: str, what: str):
        prev = owner.get(int(addr))
        if prev is not None:
            errors.append(f"duplicate IP {addr}: {prev[0]}:{prev[1]} and {what}")
            return
        owner[int(addr)] = (dev, iface)
        subnets.setdefault(net, set()).add((dev, iface, addr))

    for dev in doc.devices:
        if not dev.is_l3:
            continue
        for iface in dev.interfaces:
            if iface.ip is not None:
                claim(iface.ip.ip, iface.ip.network, dev.name, iface.name, f"{dev.name}:{iface.name}")

    vm_by_address: dict[int, str] = {}
    used_cores: dict[str, int] = {}
    used_ram: dict[str, int] = {}
    for vm in doc.vms:
        host = devices.get(vm.host)
        if host is None or host.kind != "server":
            errors.append(f"vm {vm.name}: host {vm.host} is not a declared server")
            continue
        if host.cores is None or host.ram is None:
            errors.append(f"vm {vm.name}: server {host.name} declares no cores/ram")
            continue
        used_cores[host.name] = used_cores.get(host.name, 0) + vm.alloc_cores
        used_ram[host.name] = used_ram.get(host.name, 0) + vm.alloc_ram
        iface = next((i for i in host.interfaces if i.ip is not None and vm.address in i.ip.network), None)
        if iface is None:
            errors.append(f"vm {vm.name}: address {vm.address} is on no subnet of {host.name}")
            continue
        claim(vm.address, iface.ip.network, host.name, iface.name, f"vm {vm.name} on {host.name}:{iface.name}")
        vm_by_address[int(vm.address)] = vm.name
    for name, cores in used_cores.items():
        if cores > devices[name].cores:
            errors.append(f"server {name}: VMs allocate {cores} cores of {devices[name].cores}")
        if used_ram[name] > devices[name].ram:
            errors.append(f"server {name}: VMs allocate {used_ram[name]} bytes RAM of {devices[name].ram}")

    if errors:
        raise ValidationError(errors)
    return NetworkModel(
        doc=doc,
        devices=devices,
        links=doc.links,
        vlan_domains={v: frozenset(m) for v, m in sorted(vlan_members.items())},
        subnets={n: frozenset(m) for n, m in sorted(subnets.items())},
        segments=tuple(segments),
        segment_of=segment_of,
        l2_adjacency=adjacency,
        addr_owner=owner,
        vm_by_address=vm_by_address,
        warnings=warnings,
    )


def _native_vlan(dev: DeviceConfig, phys: str) -> int | None:
    if dev.kind == "switch":
        return None
    for sub in dev.subinterfaces(phys):
        if sub.encapsulation.native:
            return sub.encapsulation.vlan_id
    return None
