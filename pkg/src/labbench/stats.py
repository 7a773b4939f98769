"""Statistics gathering and storage: periodic counter samples, an event log, CSV export.

The metric catalog is closed. Version 2 adds the three packet-accounting
counters (``packets_injected``, ``packets_delivered``, ``packets_in_flight``)
so that packet conservation can be checked from an exported CSV alone.
"""

from __future__ import annotations

import csv
import fnmatch
import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Iterable, NamedTuple

from .errors import NoData, UnknownMetric

CATALOG_VERSION = 2
METRICS = frozenset({
    "utilization", "queue_len", "bytes_tx",
    "drops_queue_full", "drops_no_route", "drops_ttl", "drops_link_down",
    "cpu_used", "cpu_alloc", "ram_used", "ram_alloc", "active_requests", "rejects_ram",
    "flows_completed", "flows_failed", "flow_latency",
    "packets_injected", "packets_delivered", "packets_in_flight",
})
DROP_METRIC = {
    "queue_full": "drops_queue_full",
    "no_route": "drops_no_route",
    "ttl_expired": "drops_ttl",
    "link_down": "drops_link_down",
}
CSV_HEADER = ("time", "object", "metric", "value")


class Sample(NamedTuple):
    time: float
    object: str
    metric: str
    value: float


@dataclass(frozen=True)
class SummaryRow:
    object: str
    metric: str
    count: int
    min: float
    max: float
    mean: float
    p95: float

    def format(self) -> str:
        return (
            f"{self.object:<48} {self.metric:<18} n={self.count:<6d} min={self.min:.6f} "
            f"max={self.max:.6f} mean={self.mean:.6f} p95={self.p95:.6f}"
        )


class StatsStore:
    """Append-only list of samples plus a text event log."""

    def __init__(self, sample_interval: float = 1.0):
        if not sample_interval > 0:
            raise ValueError("sample_interval must be positive")
        self.sample_interval = sample_interval
        self.samples: list[Sample] = []
        self.events: list[str] = []

    def __len__(self) -> int:
        return len(self.samples)

    def record(self, time: float, obj: str, metric: str, value: float) -> Sample:
        if metric not in METRICS:
            raise UnknownMetric(metric)
        sample = Sample(time, obj, metric, value)
        self.samples.append(sample)
        return sample

    def log_event(self, time: float, kind: str, /, **fields) -> str:
        parts = [f"{time:.6f}", kind]
        parts += [f"{k}={_fmt_field(v)}" for k, v in fields.items()]
        line = " ".join(parts)
        self.events.append(line)
        return line

    def select(self, pattern: str, metric: str, window: tuple[float, float] | None = None) -> list[Sample]:
        lo, hi = window if window is not None else (-math.inf, math.inf)
        return [
            s for s in self.samples
            if s.metric == metric and lo <= s.time <= hi and fnmatch.fnmatchcase(s.object, pattern)
        ]

    def series(self, obj: str, metric: str) -> list[tuple[float, float]]:
        return [(s.time, s.value) for s in self.samples if s.object == obj and s.metric == metric]


def _fmt_field(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def sample_counters(engine, t: float) -> list[Sample]:
    """Record one polling round of every counter the engine exposes."""
    store = engine.stats
    start = len(store.samples)
    rec = store.record
    interval = store.sample_interval
    for d in engine.link_dirs:
        window = d.bytes_tx - d.bytes_mark
        d.bytes_mark = d.bytes_tx
        util = window * 8 / (d.link.bandwidth * interval) if t > 0 else 0.0
        rec(t, d.name, "utilization", util)
        rec(t, d.name, "bytes_tx", d.bytes_tx)
        rec(t, d.name, "queue_len", d.qlen)
        rec(t, d.name, "drops_queue_full", sum(d.drops_prio))
        rec(t, d.name, "drops_link_down", d.drops_link_down)
        for prio in range(len(d.fifos)):
            qname = f"{d.name}#p{prio}"
            rec(t, qname, "queue_len", len(d.fifos[prio]))
            rec(t, qname, "drops_queue_full", d.drops_prio[prio])
    for dev in engine.l3_devices:
        rec(t, f"dev:{dev}", "drops_no_route", engine.dev_drops.get((dev, "no_route"), 0))
        rec(t, f"dev:{dev}", "drops_ttl", engine.dev_drops.get((dev, "ttl_expired"), 0))
    for vm in engine.cloud.vms.values():
        obj = f"vm:{vm.name}"
        for metric, value in engine.cloud.vm_metrics(vm).items():
            rec(t, obj, metric, value)
    rec(t, "net", "packets_injected", engine.injected)
    rec(t, "net", "packets_delivered", engine.delivered)
    rec(t, "net", "packets_in_flight", engine.in_flight())
    for reason, metric in DROP_METRIC.items():
        rec(t, "net", metric, engine.drops[reason])
    rec(t, "net", "flows_completed", engine.flows_completed)
    rec(t, "net", "flows_failed", engine.flows_failed)
    return store.samples[start:]


def format_csv(samples: Iterable[Sample]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in samples:
        writer.writerow((f"{s.time:.6f}", s.object, s.metric, f"{s.value:.6f}"))
    return buf.getvalue()


def write_atomic(path: str | os.PathLike, text: str) -> Path:
    """Write via a temp file in the same directory and rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def export_csv(store: StatsStore, path: str | os.PathLike) -> Path:
    return write_atomic(path, format_csv(store.samples))


def export_events(store: StatsStore, path: str | os.PathLike) -> Path:
    return write_atomic(path, "".join(line + "\n" for line in store.events))


def read_csv(path: str | os.PathLike) -> list[Sample]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValueError(f"{path}: not a stats CSV")
        return [Sample(float(t), obj, metric, float(v)) for t, obj, metric, v in reader]


def nearest_rank(values: list[float], pct: int) -> float:
    """Value at 1-based rank ceil(pct/100 * n) of the ascending sort."""
    ordered = sorted(values)
    rank = max(1, -(-pct * len(ordered) // 100))
    return ordered[rank - 1]


def summarize(store: StatsStore, pattern: str, metric: str, window: tuple[float, float] | None = None) -> SummaryRow:
    values = [s.value for s in store.select(pattern, metric, window)]
    if not values:
        raise NoData(f"no samples for {pattern} {metric}")
    return SummaryRow(pattern, metric, len(values), min(values), max(values), fmean(values), nearest_rank(values, 95))


def summary_rows(store: StatsStore) -> list[SummaryRow]:
    """One row per (object, metric) present, in first-appearance order."""
    groups: dict[tuple[str, str], list[float]] = {}
    for s in store.samples:
        groups.setdefault((s.object, s.metric), []).append(s.value)
    return [
        SummaryRow(obj, metric, len(v), min(v), max(v), fmean(v), nearest_rank(v, 95))
        for (obj, metric), v in groups.items()
    ]


@dataclass(frozen=True)
class ConservationCheck:
    instants: int
    failures: tuple[tuple[float, float, float], ...]  # (time, injected, accounted)

    @property
    def ok(self) -> bool:
        return self.instants > 0 and not self.failures


def check_conservation(samples: Iterable[Sample]) -> ConservationCheck:
    """injected = delivered + dropped (all reasons) + in flight, at every sample instant."""
    by_time: dict[float, dict[str, float]] = {}
    wanted = {"packets_injected", "packets_delivered", "packets_in_flight", *DROP_METRIC.values()}
    for s in samples:
        if s.object == "net" and s.metric in wanted:
            by_time.setdefault(s.time, {})[s.metric] = s.value
    failures = []
    for t, row in by_time.items():
        accounted = row.get("packets_delivered", 0) + row.get("packets_in_flight", 0)
        accounted += sum(row.get(m, 0) for m in DROP_METRIC.values())
        if row.get("packets_injected", 0) != accounted or len(row) != len(wanted):
            failures.append((t, row.get("packets_injected", 0), accounted))
    return ConservationCheck(len(by_time), tuple(failures))
