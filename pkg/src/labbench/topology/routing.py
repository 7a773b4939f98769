"""Centralized link-state routing: connected routes plus Dijkstra over L3 adjacencies.

Link cost is ``round(1e8 / bandwidth_bps)``, at least 1, taken from the
physical link the sender transmits on. Hosts and servers originate and sink
traffic but never forward it, so paths only transit routers.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from ipaddress import IPv4Address, IPv4Network
from typing import Mapping, NamedTuple

from .network import NetworkModel

REFERENCE_BPS = 10**8


def link_cost(bandwidth: float) -> int:
    return max(1, round(REFERENCE_BPS / bandwidth))


@dataclass(frozen=True)
class Route:
    prefix: IPv4Network
    next_hop: IPv4Address | None
    egress: str
    metric: int

    @property
    def mask_length(self) -> int:
        return self.prefix.prefixlen

    @property
    def connected(self) -> bool:
        return self.next_hop is None


@dataclass(frozen=True)
class RoutingTable:
    device: str
    routes: tuple[Route, ...] = ()

    def __iter__(self):
        return iter(self.routes)

    def __len__(self):
        return len(self.routes)

    def format(self) -> str:
        lines = [f"{self.device}:"]
        for r in self.routes:
            via = "connected" if r.next_hop is None else f"via {r.next_hop}"
            lines.append(f"  {str(r.prefix):<18} {via:<22} {r.egress:<24} metric {r.metric}")
        return "\n".join(lines)


class NextHop(NamedTuple):
    egress: str
    next_hop: IPv4Address | None


class _Unreachable:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __bool__(self):
        return False

    def __repr__(self):
        return "UNREACHABLE"


UNREACHABLE = _Unreachable()


def resolve_next_hop(table: RoutingTable, dst) -> NextHop | _Unreachable:
    """Longest-prefix match; ties go to the lowest metric, then lowest next hop."""
    dst = IPv4Address(dst)
    best = None
    best_key = None
    for route in table.routes:
        if dst not in route.prefix:
            continue
        key = (-route.prefix.prefixlen, route.metric, -1 if route.next_hop is None else int(route.next_hop))
        if best_key is None or key < best_key:
            best, best_key = route, key
    if best is None:
        return UNREACHABLE
    return NextHop(best.egress, best.next_hop)


def l3_adjacencies(
    model: NetworkModel,
    bandwidths: Mapping[int, float] | None = None,
    down=frozenset(),
) -> dict[str, list[tuple[int, str, int, str]]]:
    """``device -> [(cost, neighbour, neighbour address as int, egress interface)]``."""
    bandwidths = bandwidths or {}
    adj: dict[str, list] = {name: [] for name, dev in model.devices.items() if dev.is_l3}
    for seg in model.segments:
        for dev, iface in seg.members:
            net = model.devices[dev].interface(iface).ip.network
            for peer, peer_iface in seg.members:
                if peer == dev:
                    continue
                peer_ip = model.devices[peer].interface(peer_iface).ip
                if peer_ip.network != net:
                    continue
                path = model.l2_path((dev, iface), (peer, peer_iface), down)
                if not path:
                    continue
                first = path[0][0]
                bw = bandwidths.get(first, model.links[first].bandwidth)
                adj[dev].append((link_cost(bw), peer, int(peer_ip.ip), iface))
    for edges in adj.values():
        edges.sort()
    return adj


def compute_routes(
    model: NetworkModel,
    bandwidths: Mapping[int, float] | None = None,
    down=frozenset(),
) -> dict[str, RoutingTable]:
    """Routing table for every L3 device.

    ``bandwidths`` overrides link bandwidth by link index and ``down`` holds the
    indices of failed links; both default to the configured network.
    """
    adj = l3_adjacencies(model, bandwidths, down)
    connected: dict[str, dict[IPv4Network, str]] = {}
    for name in adj:
        nets: dict[IPv4Network, str] = {}
        for iface, ip in model.l3_interfaces(name):
            nets.setdefault(ip.network, iface)
        connected[name] = nets

    tables = {}
    for src in sorted(adj):
        labels = _spf(model, adj, src)
        best: dict[IPv4Network, tuple] = {}
        for dest, (cost, _nbr, nh, egress) in labels.items():
            for net in connected[dest]:
                if net in connected[src]:
                    continue
                cand = (cost, _nbr, nh, egress)
                if net not in best or cand < best[net]:
                    best[net] = cand
        routes = [Route(net, None, iface, 0) for net, iface in connected[src].items()]
        routes += [
            Route(net, IPv4Address(nh), egress, cost) for net, (cost, _nbr, nh, egress) in best.items()
        ]
        routes.sort(key=lambda r: (-r.prefix.prefixlen, int(r.prefix.network_address), r.metric))
        tables[src] = RoutingTable(src, tuple(routes))
    return tables


def _spf(model: NetworkModel, adj, src: str) -> dict[str, tuple]:
    """Labels ``(cost, first-hop neighbour, next hop, egress)`` for each reachable device.

    Comparing whole labels makes equal-cost ties resolve to the lexically
    lowest first-hop neighbour name, then the lowest next-hop address.
    """
    done: dict[str, tuple] = {}
    heap = []
    for cost, nbr, nh, egress in adj[src]:
        heapq.heappush(heap, ((cost, nbr, nh, egress), nbr))
    while heap:
        label, node = heapq.heappop(heap)
        if node in done or node == src:
            continue
        done[node] = label
        if model.devices[node].kind != "router":
            continue
        for cost, nbr, _nh, _eg in adj[node]:
            if nbr not in done and nbr != src:
                heapq.heappush(heap, ((label[0] + cost,) + label[1:], nbr))
    return done
