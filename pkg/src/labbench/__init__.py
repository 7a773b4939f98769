"""Discrete-event simulator of a network and cloud laboratory test bench."""

__version__ = "0.1.0"
