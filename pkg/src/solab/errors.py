"""
Exception hierarchy for solab.

Every error raised on purpose by the laboratory derives from SolabError so the
CLI can map it onto an exit code. Errors that describe a bad input also derive
from ValueError, which keeps them catchable by callers that only know the
builtin.
"""

from typing import Any, Sequence


class SolabError(Exception):
    """Base class for all solab errors."""


class ValidationError(SolabError, ValueError):
    """A profile or series failed validation.

    Attributes:
        index: First offending grid index, or None if the failure is global.
        reason: Short description of the violated condition.
    """

    def __init__(self, reason: str, index: int | None = None) -> None:
        self.reason = reason
        self.index = index
        where = f" at index {index}" if index is not None else ""
        super().__init__(f"{reason}{where}")


class ModelRejectionError(ValidationError):
    """A custom error model broke positivity or its F-power bound."""

    def __init__(self, term: str, index: int, value: float, bound: float) -> None:
        self.term = term
        self.value = value
        self.bound = bound
        super().__init__(
            f"error model rejected: E_{term} = {value:.6g} outside [0, {bound:.6g}]",
            index,
        )


class ConfigError(SolabError, ValueError):
    """Configuration could not be parsed or is out of range."""

    def __init__(self, message: str, keys: Sequence[str] = ()) -> None:
        self.keys = list(keys)
        super().__init__(message)


class DirectionError(SolabError, ValueError):
    """Integration was requested with ds > 0."""


class StepSizeError(SolabError, ValueError):
    """Requested |ds| exceeds the stability bound of the grid."""

    def __init__(self, ds: float, bound: float) -> None:
        self.ds = ds
        self.bound = bound
        super().__init__(f"|ds| = {abs(ds):.6g} exceeds stability bound {bound:.6g}")


class SingularityError(SolabError):
    """F reached zero at an interior point (neck pinch)."""

    def __init__(self, s: float, z: float) -> None:
        self.s = s
        self.z = z
        super().__init__(f"neck pinch at z = {z:.6g}, s = {s:.6g}")


class InsufficientDataError(SolabError, ValueError):
    """Not enough snapshots, samples or window length for an analysis."""


class SchemaError(SolabError, ValueError):
    """A CSV file does not carry the documented column set."""


class BarrierConstructionError(SolabError):
    """Shooting did not produce a candidate that passes verification.

    Attributes:
        prop: Name of the violated property or inequality.
        location: Barrier coordinate of the worst violation.
        report: The verifier report of the best candidate, if one was built.
    """

    def __init__(self, prop: str, location: float, report: Any = None) -> None:
        self.prop = prop
        self.location = location
        self.report = report
        super().__init__(f"barrier construction failed: {prop} violated at {location:.6g}")
