"""Lenient reader for configuration excerpts copied out of documents.

Text lifted from a typeset page tends to lose structure: interface names get
split ("fast ethernet0/1"), an address and its mask run together, long
commands wrap onto the next line, the ``interface`` keyword and the parent of
a subinterface go missing, and each device is introduced by its bare name.
:func:`normalize_excerpt` repairs exactly those defects and nothing else, and
the result goes through the strict parser.
"""

from __future__ import annotations

import re

from .config import TopologyDoc, parse_topology

_IFACE_WORDS = {
    "fastethernet": "FastEthernet",
    "gigabitethernet": "GigabitEthernet",
    "ethernet": "Ethernet",
    "serial": "Serial",
    "vlan": "Vlan",
}
_IFACE_RE = re.compile(
    r"^(?:interface\s+)?(fast\s*ethernet|gigabit\s*ethernet|ethernet|serial|vlan)\s*([0-9][0-9/.]*)$",
    re.IGNORECASE,
)
_FUSED_RE = re.compile(r"^(\d+\.\d+\.\d+\.\d+)\.(\d+\.\d+\.\d+\.\d+)$")
_HEADER_RE = re.compile(r"^[A-Za-z][\w-]*$")
# commands whose argument may have wrapped onto the following line
_WRAPPABLE = ("ip address", "switchport trunk allowed vlan", "switchport access vlan")


def _iface_name(line: str) -> str | None:
    m = _IFACE_RE.match(line)
    if not m:
        return None
    word = re.sub(r"\s+", "", m.group(1)).lower()
    return _IFACE_WORDS[word] + m.group(2)


def normalize_excerpt(text: str) -> str:
    """Rewrite a damaged excerpt into the strict topology dialect."""
    blocks: list[tuple[str, list[tuple[str, list[str]]]]] = []
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.lower() in _WRAPPABLE and i + 1 < len(lines):
            line = f"{line} {lines[i + 1]}"
            i += 1
        i += 1
        name = _iface_name(line)
        words = line.split()
        if name is not None:
            if not blocks:
                raise ValueError(f"interface {name} before any device name")
            blocks[-1][1].append((name, []))
        elif _HEADER_RE.match(line) and line.lower() not in ("end", "exit", "!"):
            blocks.append((line, []))
        else:
            if not blocks or not blocks[-1][1]:
                raise ValueError(f"command {line!r} outside an interface")
            if words[:2] == ["ip", "address"] and len(words) == 3:
                m = _FUSED_RE.match(words[2])
                if not m:
                    raise ValueError(f"cannot split address and mask in {words[2]!r}")
                line = f"ip address {m.group(1)} {m.group(2)}"
            blocks[-1][1][-1][1].append(line)

    out = []
    for device, ifaces in blocks:
        is_switch = any(cmd.startswith("switchport") for _n, cmds in ifaces for cmd in cmds)
        out.append(f"device {device} {'switch' if is_switch else 'router'}")
        names = [n for n, _c in ifaces]
        parents = sorted({n.split(".", 1)[0] for n in names if "." in n} - set(names))
        for parent in parents:
            out.append(f"interface {parent}")
        for name, cmds in ifaces:
            out.append(f"interface {name}")
            out.extend(f" {cmd}" for cmd in cmds)
        out.append("")
    return "\n".join(out)


def parse_excerpt(text: str, source: str = "<excerpt>") -> TopologyDoc:
    """Normalize then parse; line numbers in errors refer to the normalized text."""
    return parse_topology(normalize_excerpt(text), f"{source} (normalized)")
