"""Event kinds understood by the engine loop."""

from enum import IntEnum


class EventKind(IntEnum):
    INJECT = 0
    TX_COMPLETE = 1
    ARRIVE = 2
    CONTROL_APPLY = 3
    SAMPLE = 4
    SERVICE_COMPLETE = 5
