"""Quantity parsing and canonical formatting for the text formats.

Parsing goes through :class:`decimal.Decimal` so that ``"1ms"`` becomes the
same float as ``0.001``; formatting only picks a unit when parsing the result
gives back the identical float, which keeps emit/parse round trips exact.
"""

from __future__ import annotations

import re
from decimal import Decimal, InvalidOperation

_NUM = r"([0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?)"

BANDWIDTH_UNITS = {"bps": 1, "kbps": 10**3, "mbps": 10**6, "gbps": 10**9}
TIME_UNITS = {"us": Decimal("0.000001"), "ms": Decimal("0.001"), "s": Decimal(1)}
BYTE_UNITS = {
    "": 1, "b": 1,
    "kb": 10**3, "mb": 10**6, "gb": 10**9,
    "kib": 2**10, "mib": 2**20, "gib": 2**30,
}

_BW_RE = re.compile(_NUM + r"(bps|kbps|mbps|gbps)?$", re.IGNORECASE)
_TIME_RE = re.compile(_NUM + r"(us|ms|s)?$", re.IGNORECASE)
_BYTES_RE = re.compile(_NUM + r"(b|kb|mb|gb|kib|mib|gib)?$", re.IGNORECASE)


def _decimal(text: str) -> Decimal:
    try:
        return Decimal(text)
    except InvalidOperation as exc:  # pragma: no cover - regex guards this
        raise ValueError(f"bad number {text!r}") from exc


def parse_bandwidth(token: str) -> float:
    """``"10mbps"`` -> ``1e7``. A bare number is bits per second."""
    m = _BW_RE.match(token.strip())
    if not m:
        raise ValueError(f"bad bandwidth {token!r}")
    unit = (m.group(2) or "bps").lower()
    return float(_decimal(m.group(1)) * BANDWIDTH_UNITS[unit])


def parse_duration(token: str) -> float:
    """``"20ms"`` -> ``0.02``. A bare number is seconds."""
    m = _TIME_RE.match(token.strip())
    if not m:
        raise ValueError(f"bad duration {token!r}")
    unit = (m.group(2) or "s").lower()
    return float(_decimal(m.group(1)) * TIME_UNITS[unit])


def parse_bytes(token: str) -> int:
    """``"2GiB"`` -> ``2147483648``; the result must be a whole byte count."""
    m = _BYTES_RE.match(token.strip())
    if not m:
        raise ValueError(f"bad byte count {token!r}")
    value = _decimal(m.group(1)) * BYTE_UNITS[(m.group(2) or "").lower()]
    if value != value.to_integral_value():
        raise ValueError(f"byte count {token!r} is not whole")
    return int(value)


def format_bandwidth(bps: float) -> str:
    for unit in ("gbps", "mbps", "kbps"):
        scaled = bps / BANDWIDTH_UNITS[unit]
        if scaled == int(scaled) and float(Decimal(int(scaled)) * BANDWIDTH_UNITS[unit]) == bps:
            return f"{int(scaled)}{unit}"
    if bps == int(bps):
        return f"{int(bps)}bps"
    return f"{bps!r}bps"


def format_duration(seconds: float) -> str:
    for unit in ("s", "ms", "us"):
        scaled = Decimal(repr(seconds)) / TIME_UNITS[unit]
        if scaled == scaled.to_integral_value():
            whole = int(scaled)
            if float(Decimal(whole) * TIME_UNITS[unit]) == seconds:
                return f"{whole}{unit}"
    return f"{seconds!r}s"


def format_number(value: float) -> str:
    """Shortest text that parses back to ``value``."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)
