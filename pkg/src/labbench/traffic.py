"""Workload generation and replay.

The generator draws request sizes from an empirical histogram (or a fixed or
lognormal law) and arrival times from a fixed interval or a Poisson process,
all from one seeded :class:`random.Random` stream. Replay turns each entry into
a flow: request packets to the destination, service time on a VM, response
packets back.
"""

from __future__ import annotations

import bisect
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .engine import packetize
from .errors import EmptySamples, ParseError, UnknownEndpoint
from .events import EventKind

ENTRY_KINDS = ("file", "query")

# ---------------------------------------------------------------- distributions


@dataclass(frozen=True)
class SizeDistribution:
    """Byte-size law. ``params``: fixed -> size; empirical -> ((size, weight), ...);
    lognormal -> (mu, sigma) of log-bytes."""

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind == "fixed":
            (size,) = self.params
            if int(size) != size or size <= 0:
                raise ValueError("fixed size must be a positive integer")
        elif self.kind == "empirical":
            atoms = tuple((int(s), float(w)) for s, w in self.params)
            if not atoms or any(s <= 0 or w <= 0 for s, w in atoms):
                raise ValueError("empirical atoms need positive sizes and weights")
            total = math.fsum(w for _, w in atoms)
            object.__setattr__(self, "params", tuple((s, w / total) for s, w in atoms))
        elif self.kind == "lognormal":
            _mu, sigma = self.params
            if sigma < 0:
                raise ValueError("lognormal sigma must be non-negative")
        else:
            raise ValueError(f"unknown size distribution {self.kind!r}")

    @classmethod
    def fixed(cls, size: int) -> SizeDistribution:
        return cls("fixed", (size,))

    @classmethod
    def empirical(cls, atoms: Iterable[tuple[int, float]]) -> SizeDistribution:
        return cls("empirical", tuple(atoms))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> SizeDistribution:
        return cls("lognormal", (mu, sigma))

    def mean(self) -> float:
        if self.kind == "fixed":
            return float(self.params[0])
        if self.kind == "empirical":
            return math.fsum(s * w for s, w in self.params)
        mu, sigma = self.params
        return math.exp(mu + sigma * sigma / 2)

    def sample(self, rng: random.Random) -> int:
        if self.kind == "fixed":
            return int(self.params[0])
        if self.kind == "empirical":
            cum = self._cumulative()
            i = bisect.bisect_right(cum, rng.random() * cum[-1])
            return self.params[min(i, len(cum) - 1)][0]
        mu, sigma = self.params
        return max(1, round(rng.lognormvariate(mu, sigma)))

    def _cumulative(self) -> list[float]:
        cum = self.__dict__.get("_cum")
        if cum is None:
            acc, cum = 0.0, []
            for _s, w in self.params:
                acc += w
                cum.append(acc)
            object.__setattr__(self, "_cum", cum)
        return cum


def fit_empirical(samples: Sequence[int]) -> SizeDistribution:
    """One atom per distinct size, weighted by frequency."""
    if not samples:
        raise EmptySamples("no samples to fit")
    counts = Counter(int(s) for s in samples)
    n = len(samples)
    return SizeDistribution.empirical((size, counts[size] / n) for size in sorted(counts))


def read_sizes(path: str | Path) -> list[int]:
    """One byte size per line; ``#`` comments and blank lines ignored."""
    sizes = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.isdigit() or int(line) <= 0:
            raise ParseError(lineno, f"size {line!r} is not a positive integer", str(path))
        sizes.append(int(line))
    return sizes


@dataclass(frozen=True)
class ArrivalModel:
    kind: str  # fixed_interval | poisson
    value: float  # interval in seconds, or rate per second

    def __post_init__(self):
        if self.kind not in ("fixed_interval", "poisson"):
            raise ValueError(f"unknown arrival model {self.kind!r}")
        if not self.value > 0:
            raise ValueError("arrival parameter must be strictly positive")

    @classmethod
    def fixed_interval(cls, interval: float) -> ArrivalModel:
        return cls("fixed_interval", interval)

    @classmethod
    def poisson(cls, rate: float) -> ArrivalModel:
        return cls("poisson", rate)


# ---------------------------------------------------------------- workloads


@dataclass(frozen=True)
class WorkloadEntry:
    t: float
    src: str
    dst: str
    kind: str
    request_size: int
    response_size: int
    priority: int = 0

    def __post_init__(self):
        if self.t < 0 or self.t != self.t:
            raise ValueError("entry time must be >= 0")
        if self.kind not in ENTRY_KINDS:
            raise ValueError(f"kind must be file or query, got {self.kind!r}")
        if self.request_size <= 0 or self.response_size <= 0:
            raise ValueError("sizes must be positive")
        if not 0 <= self.priority <= 7:
            raise ValueError("priority must be 0-7")


@dataclass(frozen=True)
class Workload:
    entries: tuple[WorkloadEntry, ...] = ()
    seed: int = 0

    def __post_init__(self):
        ordered = tuple(sorted(self.entries, key=lambda e: e.t))
        object.__setattr__(self, "entries", ordered)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def generate_workload(
    dist: SizeDistribution,
    arrivals: ArrivalModel,
    count: int,
    src: str,
    dst: str,
    kind: str = "file",
    priority: int = 0,
    seed: int = 0,
    *,
    response_size: int | None = None,
    request_size: int | None = None,
    start: float = 0.0,
) -> Workload:
    """Draw ``count`` entries. Each entry takes its gap (Poisson only) and then
    its size from the same seeded stream.

    By default the drawn size is both request and response size. With a fixed
    ``request_size`` (a file-get header, a query text) the drawn size is the
    response instead; a fixed ``response_size`` always wins.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = random.Random(seed)
    entries = []
    t = start
    for i in range(count):
        if arrivals.kind == "fixed_interval":
            t = start + i * arrivals.value
        else:
            t += rng.expovariate(arrivals.value)
        size = dist.sample(rng)
        req = request_size or size
        entries.append(WorkloadEntry(t, src, dst, kind, req, response_size or size, priority))
    return Workload(tuple(entries), seed)


_ENTRY_KEYS = ("t", "src", "dst", "kind", "size", "resp", "prio")


def parse_workload(text: str, source: str = "<string>", seed: int = 0) -> Workload:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields: dict[str, str] = {}
        try:
            for tok in line.split():
                key, sep, value = tok.partition("=")
                if not sep or key not in _ENTRY_KEYS:
                    raise ValueError(f"unexpected token {tok!r}")
                if key in fields:
                    raise ValueError(f"{key} given twice")
                fields[key] = value
            missing = [k for k in ("t", "src", "dst", "kind", "size") if k not in fields]
            if missing:
                raise ValueError(f"missing {', '.join(missing)}")
            size = _int(fields["size"], "size")
            entries.append(WorkloadEntry(
                float(fields["t"]),
                fields["src"],
                fields["dst"],
                fields["kind"],
                size,
                _int(fields["resp"], "resp") if "resp" in fields else size,
                _int(fields.get("prio", "0"), "prio"),
            ))
        except ValueError as exc:
            raise ParseError(lineno, str(exc), source) from None
    return Workload(tuple(entries), seed)


def _int(text: str, what: str) -> int:
    if not text.lstrip("-").isdigit():
        raise ValueError(f"{what} {text!r} is not an integer")
    return int(text)


def emit_workload(workload: Workload) -> str:
    return "".join(
        f"t={e.t!r} src={e.src} dst={e.dst} kind={e.kind} size={e.request_size} "
        f"resp={e.response_size} prio={e.priority}\n"
        for e in workload.entries
    )


# ---------------------------------------------------------------- recipes

_RECIPE_KEYS = (
    "src", "dst", "kind", "count", "prio", "req", "resp", "start",
    "fixed", "samples", "lognormal", "interval", "poisson",
)


@dataclass(frozen=True)
class StreamRecipe:
    dist: SizeDistribution
    arrivals: ArrivalModel
    count: int
    src: str
    dst: str
    kind: str = "file"
    priority: int = 0
    response_size: int | None = None
    request_size: int | None = None
    start: float = 0.0


@dataclass(frozen=True)
class Recipe:
    """Workload streams that are drawn at run time from the scenario seed."""

    streams: tuple[StreamRecipe, ...] = field(default=())

    def expand(self, seed: int) -> Workload:
        entries = []
        for i, s in enumerate(self.streams):
            # one independent stream per line, derived from the scenario seed
            stream_seed = random.Random(f"{seed}:{i}").getrandbits(64)
            wl = generate_workload(
                s.dist, s.arrivals, s.count, s.src, s.dst, s.kind, s.priority, stream_seed,
                response_size=s.response_size, request_size=s.request_size, start=s.start,
            )
            entries.extend(wl.entries)
        return Workload(tuple(entries), seed)


def parse_recipe(text: str, source: str = "<string>", base_dir: str | Path = ".") -> Recipe:
    """Lines of ``stream key=value ...``; one size law and one arrival law per line."""
    streams = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] != "stream":
                raise ValueError(f"unknown keyword {tok[0]!r}")
            f: dict[str, str] = {}
            for t in tok[1:]:
                key, sep, value = t.partition("=")
                if not sep or key not in _RECIPE_KEYS or key in f:
                    raise ValueError(f"unexpected token {t!r}")
                f[key] = value
            laws = [k for k in ("fixed", "samples", "lognormal") if k in f]
            timing = [k for k in ("interval", "poisson") if k in f]
            if len(laws) != 1 or len(timing) != 1:
                raise ValueError("need exactly one of fixed/samples/lognormal and one of interval/poisson")
            if "fixed" in f:
                dist = SizeDistribution.fixed(_int(f["fixed"], "fixed"))
            elif "samples" in f:
                dist = fit_empirical(read_sizes(Path(base_dir) / f["samples"]))
            else:
                mu, sigma = (float(x) for x in f["lognormal"].split(","))
                dist = SizeDistribution.lognormal(mu, sigma)
            arrivals = (
                ArrivalModel.fixed_interval(float(f["interval"])) if "interval" in f
                else ArrivalModel.poisson(float(f["poisson"]))
            )
            for key in ("src", "dst", "count"):
                if key not in f:
                    raise ValueError(f"missing {key}")
            streams.append(StreamRecipe(
                dist, arrivals, _int(f["count"], "count"), f["src"], f["dst"],
                f.get("kind", "file"), _int(f.get("prio", "0"), "prio"),
                _int(f["resp"], "resp") if "resp" in f else None,
                _int(f["req"], "req") if "req" in f else None,
                float(f.get("start", "0")),
            ))
            s = streams[-1]
            if s.count < 0:
                raise ValueError("count must be >= 0")
            if any(v is not None and v <= 0 for v in (s.request_size, s.response_size)):
                raise ValueError("req and resp must be positive")
        except (ValueError, EmptySamples, OSError) as exc:
            raise ParseError(lineno, str(exc), source) from None
    return Recipe(tuple(streams))


# ---------------------------------------------------------------- replay


class Flow:
    """One workload entry in flight: request, optional service, response."""

    __slots__ = (
        "id", "entry", "src", "dst", "src_device", "src_addr", "dst_addr", "vm", "service",
        "priority", "request_size", "response_size", "started", "state", "request_rx",
        "response_total", "response_rx", "delivered_bytes", "finished",
    )

    def __init__(self, fid, entry, src_device, src_addr, dst_addr, vm=None, service=None):
        self.id = fid
        self.entry = entry
        self.src = entry.src
        self.dst = entry.dst
        self.src_device = src_device
        self.src_addr = src_addr
        self.dst_addr = dst_addr
        self.vm = vm
        self.service = service
        self.priority = entry.priority
        self.request_size = entry.request_size
        self.response_size = entry.response_size
        self.started = None
        self.state = "pending"
        self.request_rx = 0
        self.response_total = 0
        self.response_rx = 0
        self.delivered_bytes = 0
        self.finished = None

    def start(self, engine) -> None:
        self.started = engine.now
        self.state = "request"
        engine.flows_started += 1
        prio = engine.priority_for(self)
        for size in packetize(self.request_size, engine.mtu):
            engine.inject(self.src_device, engine.new_packet(self, self.src_addr, self.dst_addr, size, prio))

    def on_deliver(self, engine, device, pkt) -> None:
        if self.state in ("done", "failed"):
            return
        self.delivered_bytes += pkt.size
        if pkt.response:
            self.response_rx += pkt.size
            if self.response_rx >= self.response_total:
                self._complete(engine)
            return
        self.request_rx += pkt.size
        if self.request_rx < self.request_size:
            return
        if self.vm is None:
            self._complete(engine)
        else:
            self.state = "service"
            engine.cloud.admit_request(self.vm, self)

    def on_drop(self, engine, pkt, reason) -> None:
        if self.state not in ("done", "failed"):
            self.fail(engine, reason)

    def respond(self, engine, vm, size: int) -> None:
        self.state = "response"
        self.response_total = size
        prio = engine.priority_for(self)
        for part in packetize(size, engine.mtu):
            engine.inject(vm.host, engine.new_packet(self, vm.address, self.src_addr, part, prio, response=True))

    def fail(self, engine, reason: str) -> None:
        self.state = "failed"
        self.finished = engine.now
        engine.flows_failed += 1
        engine.stats.log_event(
            engine.now, "flow_failed", flow=self.id, reason=reason, delivered_bytes=self.delivered_bytes
        )

    def _complete(self, engine) -> None:
        self.state = "done"
        self.finished = engine.now
        engine.flows_completed += 1
        latency = engine.now - self.started
        engine.stats.record(engine.now, f"flow:{self.id}", "flow_latency", latency)
        engine.stats.log_event(engine.now, "flow_complete", flow=self.id, latency=latency)

    @property
    def latency(self) -> float | None:
        if self.state != "done":
            return None
        return self.finished - self.started


def resolve_endpoints(entry: WorkloadEntry, engine):
    """``(src_device, src_addr, dst_addr, vm, service)`` or :class:`UnknownEndpoint`."""
    model = engine.model
    dev = model.devices.get(entry.src)
    if dev is None or dev.kind not in ("host", "server") or model.primary_address(entry.src) is None:
        raise UnknownEndpoint(entry.src)
    src_addr = int(model.primary_address(entry.src))
    name, sep, service = entry.dst.partition(":")
    if sep:
        vm = engine.cloud.vms.get(name)
        if vm is None or vm.spec.service(service) is None:
            raise UnknownEndpoint(entry.dst)
        return entry.src, src_addr, vm.address, vm, service
    if name in engine.cloud.vms:
        return entry.src, src_addr, engine.cloud.vms[name].address, None, None
    target = model.devices.get(name)
    if target is None or model.primary_address(name) is None:
        raise UnknownEndpoint(entry.dst)
    return entry.src, src_addr, int(model.primary_address(name)), None, None


def activate(workload: Workload, engine) -> list[Flow]:
    """Schedule one inject event per entry, in file order for equal times."""
    resolved = [resolve_endpoints(entry, engine) for entry in workload.entries]
    flows = []
    for entry, (src_dev, src_addr, dst_addr, vm, service) in zip(workload.entries, resolved):
        flow = Flow(engine.next_flow_id(), entry, src_dev, src_addr, dst_addr, vm, service)
        engine.schedule(entry.t, EventKind.INJECT, flow)
        flows.append(flow)
    return flows
