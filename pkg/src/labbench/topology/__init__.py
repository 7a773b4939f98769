"""Topology files, the validated network model, and routing."""

from .config import (
    DeviceConfig,
    Encapsulation,
    Endpoint,
    InterfaceConfig,
    LinkSpec,
    TopologyDoc,
    emit_topology,
    parse_topology,
)
from .excerpt import normalize_excerpt, parse_excerpt
from .network import NetworkModel, Segment, build_network
from .routing import UNREACHABLE, NextHop, Route, RoutingTable, compute_routes, link_cost, resolve_next_hop

__all__ = [
    "DeviceConfig", "Encapsulation", "Endpoint", "InterfaceConfig", "LinkSpec", "TopologyDoc",
    "emit_topology", "parse_topology", "normalize_excerpt", "parse_excerpt", "NetworkModel", "Segment", "build_network",
    "UNREACHABLE", "NextHop", "Route", "RoutingTable", "compute_routes", "link_cost",
    "resolve_next_hop",
]
