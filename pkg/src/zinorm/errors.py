"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ZinormError(Exception):
    """Base class for all errors raised by this package."""


class InputDataError(ZinormError):
    """Malformed or inconsistent input data (bad CSV rows, unknown ids, ...)."""


class DegenerateComputationError(ZinormError):
    """A computation cannot produce a finite result from the given counts.

    Raised, for example, when a Mantel-Haenszel numerator or denominator
    sums to zero, or when no strata survive filtering.
    """
