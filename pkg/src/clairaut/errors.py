"""Exception hierarchy shared by every module of the package."""


class GeometryError(Exception):
    """Base class for all errors raised by :mod:`clairaut`."""


class NumericError(GeometryError, ArithmeticError):
    """A computation produced a non-finite value."""


class EvaluationError(GeometryError):
    """A user-supplied field or expression could not be evaluated at a point."""


class SingularMetricError(GeometryError):
    """The metric is singular or not positive-definite at a point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegenerateFrameError(GeometryError):
    """Gram-Schmidt met a vector that is (numerically) in the span of its predecessors."""


class DegeneratePlaneError(GeometryError):
    """Sectional curvature requested on a (numerically) degenerate plane."""


class IntegrationDivergedError(GeometryError):
    """Speed drift along an integrated geodesic exceeded the hard bound."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class MetricSingularityError(GeometryError):
    """The metric failed along a geodesic; ``time`` is where it happened."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NotASubmersionError(GeometryError):
    """The differential of the map does not have full rank at a point."""


class NotBasicError(GeometryError):
    """A horizontal field is not projectable (its pushforward varies along a fiber)."""


class PreconditionViolated(GeometryError):
    """A hypothesis of a check does not hold; ``hypothesis`` names it."""

    def __init__(self, message, hypothesis=""):
        super().__init__(message)
        self.hypothesis = hypothesis


class TrivialIdentityError(GeometryError):
    """The requested curvature identity is vacuous for the fiber dimension."""


class ExpressionSyntaxError(GeometryError, ValueError):
    def __init__(self, message, offset, expected=()):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.expected = frozenset(expected)


class UnknownIdentifierError(GeometryError, ValueError):
    def __init__(self, name, offset=None):
        where = "" if offset is None else f" at offset {offset}"
        super().__init__(f"unknown identifier {name!r}{where}")
        self.name = name
        self.offset = offset


class ScenarioError(GeometryError):
    """A scenario file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        prefix = "" if line is None else f"line {line}: "
        super().__init__(prefix + message)
        self.line = line


class ScenarioValidationError(GeometryError):
    """A scenario violates one of its invariants at a witness point."""

    def __init__(self, invariant, point=None, detail=""):
        msg = f"scenario invariant violated: {invariant}"
        if point is not None:
            msg += f" at point {list(map(float, point))}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.invariant = invariant
        self.point = point


class DomainError(GeometryError, ValueError):
    """Builder input outside its domain (e.g. a non-positive warping function)."""
