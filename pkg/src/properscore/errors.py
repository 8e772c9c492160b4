"""Exception hierarchy.

Every library error derives from :class:`ScoringError`; the CLI maps each
concrete class to its own exit code (see ``EXIT_CODES``).
"""

from __future__ import annotations


class ScoringError(Exception):
    """Base class for all library errors."""


class ParameterError(ScoringError, ValueError):
    """A parameter violates its documented range."""


class DomainError(ScoringError, ValueError):
    """Evaluation point outside the open unit interval."""


class RuleSpecError(ScoringError, ValueError):
    """A rule spec string or record could not be parsed or is invalid."""


class NotProperError(ScoringError, ValueError):
    """A rule fails the properness conditions (negative derivative)."""


class NonNormalizableError(ScoringError):
    """The mean reward integral diverges."""


class DegenerateRuleError(ScoringError):
    """The rule is constant, so no affine rescaling can normalize it."""


class NonConvergenceError(ScoringError):
    """Adaptive quadrature hit its subdivision cap.

    Carries the best estimate seen and its error bound.
    """

    def __init__(self, message: str, value: float = float("nan"),
                 error_estimate: float = float("inf")):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class NonFiniteIntegrandError(NonConvergenceError):
    """The integrand returned inf/nan inside the open interval."""


class InfiniteIndexError(ScoringError):
    """R'' vanishes on a set of positive measure, so the index is infinite."""


class CrossCheckError(ScoringError):
    """Two independent computations of the same quantity disagree."""


class ApproximationError(ScoringError):
    """Bernstein degree escalation hit its cap before meeting the target."""

    def __init__(self, message: str, degree: int, gap: float):
        super().__init__(message)
        self.degree = degree
        self.gap = gap


class StateError(ScoringError, ValueError):
    """An expert state (n, k) is invalid."""


class HorizonError(ScoringError):
    """Dynamic-programming horizon could not be verified."""

    def __init__(self, message: str, state: tuple[int, int] | None = None):
        super().__init__(message)
        self.state = state


class RunawayError(ScoringError):
    """A trajectory exceeded the flip guard (cost is effectively zero)."""


EXIT_CODES: dict[type[ScoringError], int] = {
    ParameterError: 10,
    DomainError: 11,
    RuleSpecError: 12,
    NotProperError: 13,
    NonNormalizableError: 14,
    DegenerateRuleError: 15,
    NonFiniteIntegrandError: 17,
    NonConvergenceError: 16,
    InfiniteIndexError: 18,
    CrossCheckError: 19,
    ApproximationError: 20,
    StateError: 21,
    HorizonError: 22,
    RunawayError: 23,
}


def exit_code_for(exc: BaseException) -> int:
    """Most specific exit code registered for ``exc``'s class."""
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    if isinstance(exc, ScoringError):
        return 9
    return 1
