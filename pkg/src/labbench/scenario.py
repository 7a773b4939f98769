"""Scenario runner: load the three input files, run, write the artifacts."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .control import ControlPlan, bind_plan, parse_control
from .engine import Engine
from .errors import ParseError, UnknownEndpoint, UnknownTarget, ValidationError
from .stats import (
    ConservationCheck,
    StatsStore,
    check_conservation,
    format_csv,
    summarize,
    summary_rows,
    write_atomic,
)
from .topology import NetworkModel, build_network, parse_topology
from .traffic import Workload, activate, parse_recipe, parse_workload

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

ARTIFACTS = ("stats.csv", "events.log", "summary.txt")


@dataclass(frozen=True)
class ScenarioSpec:
    topology_path: Path
    workload_path: Path
    until: float
    out_dir: Path
    control_path: Path | None = None
    seed: int = 0
    sample_interval: float = 1.0

    def problems(self) -> list[str]:
        issues = []
        if not self.until > 0:
            issues.append("--until must be > 0")
        if not self.sample_interval > 0:
            issues.append("--interval must be > 0")
        for path in (self.topology_path, self.workload_path, self.control_path):
            if path is not None and not Path(path).is_file():
                issues.append(f"{path}: no such file")
        return issues


@dataclass
class ScenarioResult:
    status: int
    messages: list[str] = field(default_factory=list)
    engine: Engine | None = None
    conservation: ConservationCheck | None = None

    @property
    def conservation_line(self) -> str:
        c = self.conservation
        if c is None:
            return "conservation: FAIL (no run)"
        if c.ok:
            return f"conservation: PASS ({c.instants} sample instants)"
        return f"conservation: FAIL ({len(c.failures)} of {c.instants} sample instants)"


def load_model(path: str | os.PathLike) -> NetworkModel:
    path = Path(path)
    return build_network(parse_topology(path.read_text(encoding="utf-8"), str(path)))


def load_workload(path: str | os.PathLike, seed: int) -> Workload:
    """A ``.gen`` file is a recipe drawn with ``seed``; anything else is a literal workload."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".gen":
        return parse_recipe(text, str(path), base_dir=path.parent).expand(seed)
    return parse_workload(text, str(path))


def load_control(path: str | os.PathLike | None) -> ControlPlan:
    if path is None:
        return ControlPlan()
    path = Path(path)
    return parse_control(path.read_text(encoding="utf-8"), str(path))


def prepare(spec: ScenarioSpec) -> Engine:
    """Build an engine with workload and control plan bound; raises on bad input."""
    model = load_model(spec.topology_path)
    workload = load_workload(spec.workload_path, spec.seed)
    plan = load_control(spec.control_path)
    engine = Engine(model, seed=spec.seed, stats=StatsStore(spec.sample_interval))
    activate(workload, engine)
    bind_plan(engine, plan)
    return engine


def format_summary(engine: Engine, result: ScenarioResult, spec: ScenarioSpec) -> str:
    store = engine.stats
    lines = [
        f"until={spec.until!r} seed={spec.seed} interval={spec.sample_interval!r}",
        f"packets injected={engine.injected} delivered={engine.delivered} in_flight={engine.in_flight()}",
        "drops " + " ".join(f"{k}={v}" for k, v in engine.drops.items()),
        f"flows started={engine.flows_started} completed={engine.flows_completed} failed={engine.flows_failed}",
        "",
    ]
    lines += [row.format() for row in summary_rows(store) if not row.object.startswith("flow:")]
    if store.select("flow:*", "flow_latency"):
        lines.append(summarize(store, "flow:*", "flow_latency").format())
    lines += ["", result.conservation_line]
    return "\n".join(lines) + "\n"


def run_scenario(spec: ScenarioSpec) -> ScenarioResult:
    problems = spec.problems()
    if problems:
        return ScenarioResult(EXIT_INVALID, problems)
    try:
        engine = prepare(spec)
    except (ParseError, ValidationError, UnknownEndpoint, UnknownTarget) as exc:
        return ScenarioResult(EXIT_INVALID, [str(exc)])
    except OSError as exc:
        return ScenarioResult(EXIT_INVALID, [f"{exc.filename}: {exc.strerror}"])
    result = ScenarioResult(EXIT_OK, engine=engine)
    try:
        engine.run(spec.until)
    except Exception as exc:  # any failure inside the loop is a runtime error, exit 2
        result.status = EXIT_RUNTIME
        result.messages.append(f"runtime error at t={engine.now:.6f}: {type(exc).__name__}: {exc}")
    result.conservation = check_conservation(engine.stats.samples)
    out = Path(spec.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_atomic(out / "stats.csv", format_csv(engine.stats.samples))
        write_atomic(out / "events.log", "".join(line + "\n" for line in engine.stats.events))
        write_atomic(out / "summary.txt", format_summary(engine, result, spec))
    except OSError as exc:
        result.status = EXIT_RUNTIME
        result.messages.append(f"{exc.filename}: {exc.strerror}")
    result.messages.append(result.conservation_line)
    return result
