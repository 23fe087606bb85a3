"""Deterministic escape from spurious local minima in low-rank matrix sensing."""

__version__ = "0.1.0"
