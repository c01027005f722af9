"""Exception types raised by the library."""


class OrliczError(Exception):
    """Base class for all library errors."""


class ExpressionError(OrliczError, ValueError):
    """A field or integrand expression could not be parsed or is not allowed."""


class NotAdmissible(OrliczError, ValueError):
    """An integrand violates a structural condition (growth window, positivity, ...)."""


class NonPositiveDerivative(OrliczError, ArithmeticError):
    """The computed z-derivative is not strictly positive at some z > 0."""


class ConjugateBracketFailure(OrliczError, ArithmeticError):
    """No bracket for the maximiser of ``s*t - phi(s)`` was found."""


class ComponentGapTooLarge(OrliczError, ValueError):
    """Consecutive domain components are farther apart than the kernel ball diameter."""


class KernelLowerBoundViolated(OrliczError, ValueError):
    """The kernel drops below its lower bound on the ball, or is negative."""


class NonFiniteIntegrand(OrliczError, ArithmeticError):
    """A pair integrand evaluated to inf or nan."""

    def __init__(self, index, value=None):
        self.index = tuple(int(k) for k in index)
        self.value = value
        super().__init__(f"non-finite integrand {value!r} at node pair {self.index}")


class MollifierTooWide(OrliczError, ValueError):
    """The mollifier radius exceeds half the width of a component."""


class BracketExpansionFailure(OrliczError, ArithmeticError):
    """The Luxemburg root could not be bracketed (non-monotone functional)."""


class DegenerateSample(OrliczError, ValueError):
    """Every sample function is constant."""


class LineSearchStalled(OrliczError, ArithmeticError):
    """Armijo backtracking exceeded its halving budget."""


class ZeroDenominator(OrliczError, ZeroDivisionError):
    """A dual pairing denominator vanished (constant generator)."""


class LadderTooShort(OrliczError, ValueError):
    """A density experiment needs at least three rungs."""


class ConfigError(OrliczError, ValueError):
    """A configuration file is malformed."""
