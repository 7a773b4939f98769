"""Timed control plan: parameter changes applied inside the event loop."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError, UnknownTarget
from .events import EventKind
from .units import format_bandwidth, format_duration, format_number, parse_bandwidth, parse_bytes, parse_duration

ACTION_KINDS = (
    "set_bandwidth", "set_delay", "set_queue_capacity", "set_priority",
    "link_down", "link_up", "set_vm_cores", "set_vm_ram",
)
_LINK_KINDS = {"set_bandwidth", "set_delay", "set_queue_capacity", "link_down", "link_up"}
_VM_KINDS = {"set_vm_cores", "set_vm_ram"}
_NO_VALUE = {"link_down", "link_up"}


@dataclass(frozen=True)
class ControlAction:
    """``target`` is ``("link", "dev:iface")``, ``("vm", name)``, ``("flow", id)``
    or ``("pair", src, dst)``; ``value`` is in base units (bps, s, bytes)."""

    t: float
    kind: str
    target: tuple
    value: float | None = None

    def target_text(self) -> str:
        if self.target[0] == "pair":
            return f"src={self.target[1] or '*'},dst={self.target[2] or '*'}"
        return f"{self.target[0]}={self.target[1]}"

    def value_text(self) -> str:
        if self.value is None:
            return "-"
        if self.kind == "set_bandwidth":
            return format_bandwidth(self.value)
        if self.kind == "set_delay":
            return format_duration(self.value)
        return format_number(self.value)

    def format(self) -> str:
        head = f"t={format_number(self.t)} {self.kind} "
        if self.target[0] == "pair":
            sel = " ".join(f"{k}={v}" for k, v in (("src", self.target[1]), ("dst", self.target[2])) if v)
        else:
            sel = f"{self.target[0]}={self.target[1]}"
        tail = "" if self.value is None else f" value={self.value_text()}"
        return head + sel + tail


@dataclass(frozen=True)
class ControlPlan:
    actions: tuple[ControlAction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(sorted(self.actions, key=lambda a: a.t)))

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)


def _parse_value(kind: str, text: str) -> float:
    if kind == "set_bandwidth":
        value = parse_bandwidth(text)
        if not value > 0:
            raise ValueError("bandwidth must be positive")
        return value
    if kind == "set_delay":
        return parse_duration(text)  # the grammar admits no negatives
    if kind == "set_vm_ram":
        value = parse_bytes(text)
        if value <= 0:
            raise ValueError("VM RAM must be positive")
        return value
    if not text.isdigit():
        raise ValueError(f"{kind} value must be a non-negative integer")
    value = int(text)
    if kind == "set_vm_cores" and value < 1:
        raise ValueError("cores must be >= 1")
    if kind == "set_priority" and value > 7:
        raise ValueError("priority must be 0-7")
    return value


def parse_control(text: str, source: str = "<string>") -> ControlPlan:
    actions = []
    seen: set[tuple] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            tok = line.split()
            if len(tok) < 2 or not tok[0].startswith("t="):
                raise ValueError("expected t=<seconds> <kind> ...")
            t = parse_duration(tok[0][2:])
            kind = tok[1]
            if kind not in ACTION_KINDS:
                raise ValueError(f"unknown action {kind!r}")
            fields: dict[str, str] = {}
            for item in tok[2:]:
                key, sep, value = item.partition("=")
                if not sep or key in fields or key not in ("link", "vm", "flow", "src", "dst", "value"):
                    raise ValueError(f"unexpected token {item!r}")
                fields[key] = value
            target = _target(kind, fields)
            if kind in _NO_VALUE:
                if "value" in fields:
                    raise ValueError(f"{kind} takes no value")
                value = None
            else:
                if "value" not in fields:
                    raise ValueError(f"{kind} needs value=")
                value = _parse_value(kind, fields["value"])
            key = (t, target, kind)
            if key in seen:
                raise ValueError(f"duplicate action {kind} on {target} at t={t}")
            seen.add(key)
            actions.append(ControlAction(t, kind, target, value))
        except ValueError as exc:
            raise ParseError(lineno, str(exc), source) from None
    return ControlPlan(tuple(actions))


def _target(kind: str, fields: dict[str, str]) -> tuple:
    keys = set(fields) - {"value"}
    if kind in _LINK_KINDS:
        if keys != {"link"} or ":" not in fields["link"]:
            raise ValueError(f"{kind} needs link=<device>:<interface>")
        return ("link", fields["link"])
    if kind in _VM_KINDS:
        if keys != {"vm"}:
            raise ValueError(f"{kind} needs vm=<name>")
        return ("vm", fields["vm"])
    if keys == {"flow"}:
        if not fields["flow"].isdigit():
            raise ValueError("flow id must be a non-negative integer")
        return ("flow", int(fields["flow"]))
    if keys and keys <= {"src", "dst"}:
        return ("pair", fields.get("src"), fields.get("dst"))
    raise ValueError("set_priority needs flow=<id> or src=/dst=")


def check_target(engine, action: ControlAction) -> None:
    scope, *ident = action.target
    if scope == "link" and ident[0] not in engine.link_by_endpoint:
        raise UnknownTarget(ident[0])
    if scope == "vm" and ident[0] not in engine.cloud.vms:
        raise UnknownTarget(ident[0])
    if scope == "pair":
        for name in ident:
            if name is not None and name.partition(":")[0] not in engine.model.devices \
                    and name.partition(":")[0] not in engine.cloud.vms:
                raise UnknownTarget(name)


def bind_plan(engine, plan: ControlPlan) -> None:
    """Check every target, then schedule one control event per action."""
    for action in plan:
        check_target(engine, action)
    for action in plan:
        engine.schedule(action.t, EventKind.CONTROL_APPLY, action)


@dataclass(frozen=True)
class ActionError:
    action: ControlAction
    reason: str


def apply_action(engine, action: ControlAction) -> bool | ActionError:
    """Apply ``action`` at the current clock; a rejected value yields an :class:`ActionError`."""
    check_target(engine, action)
    kind = action.kind
    try:
        if kind in _LINK_KINDS:
            link = engine.link(action.target[1])
            if kind == "set_bandwidth":
                engine.set_bandwidth(link, action.value)
            elif kind == "set_delay":
                engine.set_delay(link, action.value)
            elif kind == "set_queue_capacity":
                engine.set_queue_capacity(link, int(action.value))
            else:
                engine.set_link_state(link, kind == "link_up")
        elif kind in _VM_KINDS:
            vm = engine.cloud.vms[action.target[1]]
            if kind == "set_vm_cores":
                engine.cloud.set_cores(vm, int(action.value))
            else:
                engine.cloud.set_ram(vm, int(action.value))
        else:
            engine.priority_overrides.append((action.target, int(action.value)))
    except ValueError as exc:
        engine.stats.log_event(
            engine.now, "control_error", kind=kind, target=action.target_text(), reason=str(exc).replace(" ", "_")
        )
        return ActionError(action, str(exc))
    engine.stats.log_event(
        engine.now, "control", t=format_number(action.t), kind=kind,
        target=action.target_text(), value=action.value_text(),
    )
    return True
