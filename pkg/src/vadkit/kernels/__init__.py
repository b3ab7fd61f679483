"""Numeric loop kernels with jitted and pure numpy implementations."""

from . import assignment, lstm, resize, sepconv

__all__ = ["assignment", "lstm", "resize", "sepconv"]
