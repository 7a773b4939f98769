"""Exception types shared by the file parsers and the simulator."""

from __future__ import annotations


class BenchError(Exception):
    """Base class for every error raised by labbench."""


class ParseError(BenchError, ValueError):
    """A line of an input document could not be parsed.

    ``line`` is 1-based; ``source`` names the file (or ``<string>``).
    """

    def __init__(self, line: int, reason: str, source: str | None = None):
        self.line = line
        self.reason = reason
        self.source = source or "<string>"
        super().__init__(f"{self.source}:{line}: {reason}")


class DuplicateDevice(ParseError):
    pass


class DanglingLinkEndpoint(ParseError):
    pass


class ValidationError(BenchError):
    """A parsed model violates one or more structural rules."""

    def __init__(self, issues: list[str]):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


class UnknownEndpoint(BenchError, KeyError):
    def __str__(self) -> str:
        return f"unknown endpoint: {self.args[0]}"


class UnknownTarget(BenchError, KeyError):
    def __str__(self) -> str:
        return f"unknown control target: {self.args[0]}"


class UnknownService(BenchError, KeyError):
    def __str__(self) -> str:
        return f"unknown service: {self.args[0]}"


class UnknownMetric(BenchError, KeyError):
    def __str__(self) -> str:
        return f"metric not in catalog: {self.args[0]}"


class PastEventError(BenchError):
    pass


class LinkDownError(BenchError):
    pass


class EmptySamples(BenchError, ValueError):
    pass


class NoData(BenchError, LookupError):
    pass
