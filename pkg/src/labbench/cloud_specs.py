"""Declarative VM and service descriptions (parsed from the topology file)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from ipaddress import IPv4Address

SERVICE_KINDS = ("db", "file")


@dataclass(frozen=True)
class ResponseRule:
    """How a service sizes its reply: a fixed byte count or a multiple of the request."""

    kind: str  # "fixed" | "mult"
    value: float

    def __post_init__(self):
        if self.kind not in ("fixed", "mult"):
            raise ValueError(f"unknown response rule {self.kind!r}")
        if self.value < 0 or (self.kind == "fixed" and (self.value <= 0 or self.value != int(self.value))):
            raise ValueError(f"bad response rule value {self.value!r}")

    def size(self, request_size: int) -> int:
        if self.kind == "fixed":
            return int(self.value)
        return max(1, math.ceil(self.value * request_size))


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    kind: str
    cpu_fixed: float
    cpu_per_byte: float
    ram_footprint: int
    response_rule: ResponseRule | None = None  # None: use the requested size

    def __post_init__(self):
        if self.kind not in SERVICE_KINDS:
            raise ValueError(f"service kind must be db or file, got {self.kind!r}")
        if min(self.cpu_fixed, self.cpu_per_byte, self.ram_footprint) < 0:
            raise ValueError("service parameters must be non-negative")
        if self.kind == "db" and self.cpu_fixed == 0 and self.cpu_per_byte == 0:
            raise ValueError("a db service needs cpu_fixed or cpu_per_byte > 0")

    def response_size(self, request_size: int, requested: int) -> int:
        if self.response_rule is None:
            return requested
        return self.response_rule.size(request_size)

    def work(self, response_size: int) -> float:
        """Core-seconds needed to serve one request."""
        return self.cpu_fixed + self.cpu_per_byte * response_size


@dataclass(frozen=True)
class VmSpec:
    name: str
    host: str
    alloc_cores: int
    alloc_ram: int
    address: IPv4Address
    services: tuple[ServiceSpec, ...] = field(default=())

    def __post_init__(self):
        if self.alloc_cores < 1:
            raise ValueError("a VM needs at least one core")
        if self.alloc_ram <= 0:
            raise ValueError("a VM needs RAM")

    def service(self, name: str) -> ServiceSpec | None:
        for svc in self.services:
            if svc.name == name:
                return svc
        return None
