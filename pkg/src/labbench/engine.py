"""Discrete-event engine: links with serialization and propagation delay,
per-priority tail-drop queues, strict-priority transmitters, L3 forwarding.

One heap orders every event by ``(time, seq)``; ``seq`` is assigned when the
event is scheduled, so equal-time events run in scheduling order.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from ipaddress import IPv4Address

from .cloud import CloudRuntime
from .errors import LinkDownError, PastEventError
from .events import EventKind
from .stats import StatsStore, sample_counters
from .topology.config import Endpoint
from .topology.network import NetworkModel
from .topology.routing import UNREACHABLE, compute_routes, resolve_next_hop

DEFAULT_MTU = 1500
DEFAULT_TTL = 64
PRIORITIES = 8
DROP_REASONS = ("queue_full", "no_route", "ttl_expired", "link_down")

ENQUEUED = "enqueued"
DROPPED = "dropped"

_MISSING = object()


def packetize(nbytes: int, mtu: int = DEFAULT_MTU) -> list[int]:
    """Split a message into MTU-sized packets plus a remainder."""
    if nbytes <= 0:
        raise ValueError("message size must be positive")
    full, rest = divmod(nbytes, mtu)
    return [mtu] * full + ([rest] if rest else [])


class Packet:
    __slots__ = ("id", "flow", "src", "dst", "size", "priority", "ttl", "created_at", "response", "path", "hop")

    def __init__(self, pid, flow, src, dst, size, priority, ttl, created_at, response=False):
        self.id = pid
        self.flow = flow
        self.src = src  # IPv4 address as int
        self.dst = dst
        self.size = size
        self.priority = priority
        self.ttl = ttl
        self.created_at = created_at
        self.response = response
        self.path = ()
        self.hop = 0

    @property
    def flow_id(self):
        return None if self.flow is None else self.flow.id

    def __repr__(self):
        return (
            f"Packet(id={self.id}, {IPv4Address(self.src)}->{IPv4Address(self.dst)}, "
            f"size={self.size}, prio={self.priority}, ttl={self.ttl})"
        )


class LinkState:
    """Mutable runtime parameters of one physical link."""

    def __init__(self, index, spec):
        self.index = index
        self.spec = spec
        self.bandwidth = float(spec.bandwidth)
        self.delay = float(spec.prop_delay)
        self.capacity = spec.queue_capacity
        self.up = True
        self.dirs = (LinkDirection(self, 0), LinkDirection(self, 1))


class LinkDirection:
    """One transmit direction: eight FIFOs, a transmitter, and the wire."""

    __slots__ = (
        "link", "direction", "name", "src_device", "dst_device", "fifos", "qlen", "busy", "current",
        "on_wire", "epoch", "bytes_tx", "bytes_mark", "packets_tx", "accepted", "drops_prio",
        "drops_link_down", "area", "area_t",
    )

    def __init__(self, link: LinkState, direction: int):
        spec = link.spec
        src, dst = (spec.a, spec.b) if direction == 0 else (spec.b, spec.a)
        self.link = link
        self.direction = direction
        self.name = f"link:{src}->{dst}"
        self.src_device = src.device
        self.dst_device = dst.device
        self.fifos = [deque() for _ in range(PRIORITIES)]
        self.qlen = 0
        self.busy = 0
        self.current = None
        self.on_wire: dict[int, Packet] = {}
        self.epoch = 0
        self.bytes_tx = 0
        self.bytes_mark = 0
        self.packets_tx = 0
        self.accepted = 0
        self.drops_prio = [0] * PRIORITIES
        self.drops_link_down = 0
        self.area = 0.0  # integral of (queued + transmitting) over time
        self.area_t = 0.0

    def in_flight(self) -> int:
        return self.qlen + self.busy + len(self.on_wire)

    def occupancy_integral(self, now: float) -> float:
        return self.area + (self.qlen + self.busy) * (now - self.area_t)


class Engine:
    """Single-threaded simulator owning all network, cloud and statistics state."""

    def __init__(
        self,
        model: NetworkModel,
        *,
        mtu: int = DEFAULT_MTU,
        ttl: int = DEFAULT_TTL,
        sample_interval: float | None = 1.0,
        stats: StatsStore | None = None,
        seed: int = 0,
        trace: bool = False,
    ):
        self.model = model
        self.mtu = mtu
        self.default_ttl = ttl
        self.seed = seed
        self.rng = random.Random(seed)
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self._pid = 0
        self._fid = 0
        self.trace: list | None = [] if trace else None
        self.stats = stats or StatsStore(sample_interval or 1.0)

        self.links = [LinkState(i, spec) for i, spec in enumerate(model.links)]
        self.link_dirs = [d for link in self.links for d in link.dirs]
        self.link_by_endpoint: dict[str, LinkState] = {}
        for link in self.links:
            self.link_by_endpoint[str(link.spec.a)] = link
            self.link_by_endpoint[str(link.spec.b)] = link
        self.kind = {name: dev.kind for name, dev in model.devices.items()}
        self.l3_devices = [name for name, dev in model.devices.items() if dev.is_l3]
        self.local_addrs: dict[str, set[int]] = {name: set() for name in model.devices}
        for addr, (dev, _iface) in model.addr_owner.items():
            self.local_addrs[dev].add(addr)

        self.routes = compute_routes(model)
        self._paths: dict = {}
        self.priority_overrides: list[tuple[tuple, int]] = []

        self.injected = 0
        self.delivered = 0
        self.drops = dict.fromkeys(DROP_REASONS, 0)
        self.dev_drops: dict[tuple[str, str], int] = {}
        self.flows_started = 0
        self.flows_completed = 0
        self.flows_failed = 0
        self.cloud = CloudRuntime(self, model)

        self._handlers = {
            EventKind.INJECT: self._on_inject,
            EventKind.TX_COMPLETE: self._on_tx_complete,
            EventKind.ARRIVE: self._on_arrive,
            EventKind.CONTROL_APPLY: self._on_control,
            EventKind.SAMPLE: self._on_sample,
            EventKind.SERVICE_COMPLETE: self.cloud.on_service_event,
        }
        self._sample_k = 0
        if sample_interval:
            self.schedule(0.0, EventKind.SAMPLE, 0)

    # ------------------------------------------------------------ event loop

    def schedule(self, time: float, kind: EventKind, payload=None) -> int:
        """Queue an event; returns its sequence number (the handle)."""
        if time < self.now:
            raise PastEventError(f"event at {time} is before now={self.now}")
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (time, seq, kind, payload))
        return seq

    def run(self, until: float) -> float:
        """Execute every event with time <= ``until``; the clock ends at ``until``."""
        if until < self.now:
            raise PastEventError(f"run(until={until}) is before now={self.now}")
        heap = self._heap
        handlers = self._handlers
        trace = self.trace
        pop = heapq.heappop
        while heap and heap[0][0] <= until:
            time, seq, kind, payload = pop(heap)
            self.now = time
            if trace is not None:
                trace.append((time, seq, int(kind), _describe(kind, payload)))
            handlers[kind](payload)
        self.now = until
        return until

    @property
    def pending(self) -> int:
        return len(self._heap)

    def next_flow_id(self) -> int:
        fid = self._fid
        self._fid += 1
        return fid

    # ------------------------------------------------------------ packets

    def new_packet(self, flow, src: int, dst: int, size: int, priority: int = 0, response: bool = False) -> Packet:
        if not 0 < size <= self.mtu:
            raise ValueError(f"packet size {size} outside (0, MTU={self.mtu}]")
        if not 0 <= priority < PRIORITIES:
            raise ValueError(f"priority {priority} outside 0-7")
        pid = self._pid
        self._pid += 1
        return Packet(pid, flow, src, dst, size, priority, self.default_ttl, self.now, response)

    def send(self, time: float, device: str, dst, size: int, priority: int = 0, flow=None) -> Packet:
        """Schedule a bare packet from ``device`` to address ``dst`` at ``time``."""
        src = self.model.primary_address(device)
        pkt = self.new_packet(flow, int(src) if src is not None else 0, int(IPv4Address(dst)), size, priority)
        pkt.created_at = time
        self.schedule(time, EventKind.INJECT, (device, pkt))
        return pkt

    def inject(self, device: str, pkt: Packet) -> None:
        """A packet originates at ``device`` now."""
        self.injected += 1
        if pkt.dst in self.local_addrs[device]:
            self._deliver(device, pkt)
        else:
            self._route(device, pkt)

    def enqueue_packet(self, d: LinkDirection, pkt: Packet) -> str:
        """Offer ``pkt`` to a link direction: transmit, queue, or tail-drop it."""
        if not d.link.up:
            self._drop(pkt, "link_down", d.name)
            d.drops_link_down += 1
            raise LinkDownError(d.name)
        if not d.busy:
            self._touch(d)
            d.accepted += 1
            self._transmit(d, pkt)
            return ENQUEUED
        fifo = d.fifos[pkt.priority]
        if len(fifo) >= d.link.capacity:
            d.drops_prio[pkt.priority] += 1
            self._drop(pkt, "queue_full", d.name)
            return DROPPED
        self._touch(d)
        fifo.append(pkt)
        d.qlen += 1
        d.accepted += 1
        return ENQUEUED

    def transmit(self, d: LinkDirection) -> int | None:
        """Start the next transmission on an idle direction (strict priority)."""
        if d.busy or not d.qlen:
            return None
        self._touch(d)
        return self._transmit(d, self._dequeue(d))

    def _dequeue(self, d: LinkDirection) -> Packet:
        for fifo in reversed(d.fifos):
            if fifo:
                d.qlen -= 1
                return fifo.popleft()
        raise AssertionError("dequeue from empty direction")

    def _transmit(self, d: LinkDirection, pkt: Packet) -> int:
        link = d.link
        d.busy = 1
        d.current = pkt
        # delay is captured now so later set_delay actions leave this packet alone
        return self.schedule(self.now + pkt.size * 8 / link.bandwidth, EventKind.TX_COMPLETE, (d, d.epoch, link.delay))

    def _touch(self, d: LinkDirection) -> None:
        now = self.now
        d.area += (d.qlen + d.busy) * (now - d.area_t)
        d.area_t = now

    def _on_tx_complete(self, payload) -> None:
        d, epoch, delay = payload
        if epoch != d.epoch:
            return
        self._touch(d)
        pkt = d.current
        d.current = None
        d.bytes_tx += pkt.size
        d.packets_tx += 1
        d.on_wire[pkt.id] = pkt
        self.schedule(self.now + delay, EventKind.ARRIVE, (d, pkt, epoch))
        if d.qlen:
            self._transmit(d, self._dequeue(d))
        else:
            d.busy = 0

    def _on_arrive(self, payload) -> None:
        d, pkt, epoch = payload
        if epoch != d.epoch:
            return
        del d.on_wire[pkt.id]
        pkt.hop += 1
        if pkt.hop < len(pkt.path):
            # switches forward within the VLAN with no added latency
            try:
                self.enqueue_packet(pkt.path[pkt.hop], pkt)
            except LinkDownError:
                pass
        else:
            self.forward(d.dst_device, pkt)

    def forward(self, device: str, pkt: Packet) -> None:
        """Handle a packet that reached an L3 device."""
        if pkt.dst in self.local_addrs[device]:
            self._deliver(device, pkt)
            return
        if self.kind[device] != "router":
            self._drop(pkt, "no_route", device, device)
            return
        if pkt.ttl <= 1:
            self._drop(pkt, "ttl_expired", device, device)
            return
        pkt.ttl -= 1
        self._route(device, pkt)

    def _route(self, device: str, pkt: Packet) -> None:
        key = (device, pkt.dst)
        path = self._paths.get(key, _MISSING)
        if path is _MISSING:
            path = self._paths[key] = self._lookup(device, pkt.dst)
        if path is None:
            self._drop(pkt, "no_route", device, device)
            return
        pkt.path = path
        pkt.hop = 0
        try:
            self.enqueue_packet(path[0], pkt)
        except LinkDownError:
            pass

    def _lookup(self, device: str, dst: int):
        table = self.routes.get(device)
        if table is None:
            return None
        hop = resolve_next_hop(table, dst)
        if hop is UNREACHABLE:
            return None
        target = dst if hop.next_hop is None else int(hop.next_hop)
        owner = self.model.addr_owner.get(target)
        if owner is None or owner[0] == device:
            return None
        down = {link.index for link in self.links if not link.up}
        hops = self.model.l2_path((device, hop.egress), owner, down)
        if not hops:
            return None
        return tuple(self.links[i].dirs[direction] for i, direction in hops)

    def _deliver(self, device: str, pkt: Packet) -> None:
        self.delivered += 1
        if pkt.flow is not None:
            pkt.flow.on_deliver(self, device, pkt)

    def _drop(self, pkt: Packet, reason: str, where: str, device: str | None = None) -> None:
        self.drops[reason] += 1
        if device is not None:
            key = (device, reason)
            self.dev_drops[key] = self.dev_drops.get(key, 0) + 1
        self.stats.log_event(
            self.now, "drop", reason=reason, packet=pkt.id,
            flow="-" if pkt.flow is None else pkt.flow.id, at=where,
        )
        if pkt.flow is not None:
            pkt.flow.on_drop(self, pkt, reason)

    def in_flight(self) -> int:
        return sum(d.qlen + d.busy + len(d.on_wire) for d in self.link_dirs)

    # ------------------------------------------------------------ events

    def _on_inject(self, payload) -> None:
        if type(payload) is tuple:
            self.inject(*payload)
        else:
            payload.start(self)

    def _on_control(self, action) -> None:
        from .control import apply_action

        apply_action(self, action)

    def _on_sample(self, k: int) -> None:
        sample_counters(self, self.now)
        self._sample_k = k + 1
        self.schedule((k + 1) * self.stats.sample_interval, EventKind.SAMPLE, k + 1)

    # ------------------------------------------------------------ control surface

    def link(self, endpoint: str | Endpoint) -> LinkState:
        return self.link_by_endpoint[str(endpoint)]

    def recompute_routes(self) -> None:
        self.routes = compute_routes(
            self.model,
            bandwidths={link.index: link.bandwidth for link in self.links},
            down=frozenset(link.index for link in self.links if not link.up),
        )
        self._paths.clear()

    def set_bandwidth(self, link: LinkState, bps: float) -> None:
        if not bps > 0:
            raise ValueError("bandwidth must be positive")
        link.bandwidth = float(bps)
        self.recompute_routes()

    def set_delay(self, link: LinkState, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("delay must be non-negative")
        link.delay = float(seconds)

    def set_queue_capacity(self, link: LinkState, capacity: int) -> None:
        if capacity < 0:
            raise ValueError("queue capacity must be non-negative")
        link.capacity = int(capacity)
        for d in link.dirs:
            for prio in range(PRIORITIES - 1, -1, -1):
                fifo = d.fifos[prio]
                while len(fifo) > capacity:
                    self._touch(d)
                    pkt = fifo.pop()
                    d.qlen -= 1
                    d.drops_prio[prio] += 1
                    self._drop(pkt, "queue_full", d.name)

    def set_link_state(self, link: LinkState, up: bool) -> None:
        if link.up == up:
            return
        link.up = up
        if not up:
            for d in link.dirs:
                self._touch(d)
                lost = []
                for fifo in reversed(d.fifos):
                    lost.extend(fifo)
                    fifo.clear()
                if d.current is not None:
                    lost.append(d.current)
                lost.extend(d.on_wire.values())
                d.qlen = 0
                d.busy = 0
                d.current = None
                d.on_wire.clear()
                d.epoch += 1
                for pkt in lost:
                    d.drops_link_down += 1
                    self._drop(pkt, "link_down", d.name)
        self.recompute_routes()

    def priority_for(self, flow) -> int:
        prio = flow.priority
        for selector, value in self.priority_overrides:
            if selector[0] == "flow":
                if selector[1] == flow.id:
                    prio = value
            elif (selector[1] is None or selector[1] == flow.src) and (
                selector[2] is None or selector[2] in (flow.dst, flow.dst.partition(":")[0])
            ):
                prio = value
        return prio


def _describe(kind, payload) -> str:
    if kind == EventKind.TX_COMPLETE:
        return payload[0].name
    if kind == EventKind.ARRIVE:
        return f"{payload[0].name} pkt={payload[1].id}"
    if kind == EventKind.INJECT:
        if type(payload) is tuple:
            return f"{payload[0]} pkt={payload[1].id}"
        return f"flow={payload.id}"
    if kind == EventKind.SERVICE_COMPLETE:
        return f"vm={payload[0].name} gen={payload[1]}"
    return repr(payload)
