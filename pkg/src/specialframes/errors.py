"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class GeometryError(Exception):
    """Base class for every error raised by this package."""


class DomainBoundaryError(GeometryError):
    """A point (or a finite-difference stencil) left the chart domain."""

    def __init__(self, point, message: str = "point outside chart domain"):
        self.point = tuple(float(v) for v in point)
        super().__init__(f"{message}: {self.point}")


class SingularFrameError(GeometryError):
    """A frame matrix is numerically singular (|det| <= 1e-12)."""

    def __init__(self, det: float, point=None):
        self.det = det
        self.point = None if point is None else tuple(float(v) for v in point)
        where = "" if self.point is None else f" at {self.point}"
        super().__init__(f"singular frame{where}: det = {det:.3e}")


class EvaluationError(GeometryError):
    """An expression or field could not be evaluated (pole, bad domain of a function)."""

    def __init__(self, message: str, offset: int | None = None, text: str | None = None):
        self.offset = offset
        self.text = text
        where = "" if offset is None else f" (at offset {offset})"
        super().__init__(f"{message}{where}")


class ParseError(GeometryError):
    """Syntax error in a coefficient expression."""

    def __init__(self, offset: int, message: str, expected: str = ""):
        self.offset = offset
        self.message = message
        self.expected = expected
        tail = f"; expected {expected}" if expected else ""
        super().__init__(f"offset {offset}: {message}{tail}")


class TransportError(GeometryError):
    """Coefficient evaluation failed while integrating a transport equation."""

    def __init__(self, parameter, cause: Exception):
        self.parameter = parameter
        self.cause = cause
        super().__init__(f"coefficient evaluation failed at s = {parameter}: {cause}")


class AdaptedCoordinatesRequired(GeometryError):
    """The operation needs a map of the form s -> (s, t0) up to axis permutation."""


class ObstructionFailed(GeometryError):
    """Frame construction refused because the integrability obstruction does not vanish."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"obstruction max-norm {report.max_norm:.3e} >= tolerance {report.tolerance:.1e}"
        )


class ScenarioError(GeometryError):
    """Malformed or inconsistent scenario configuration."""
