"""Exception hierarchy shared by the numerical modules and the CLI."""


class QVerifyError(Exception):
    """Base class for every error raised by qverify."""


class DomainError(QVerifyError, ValueError):
    """An argument lies outside the domain of a function."""


class SingularParameterError(QVerifyError, ZeroDivisionError):
    """A denominator factor vanishes for the requested parameters."""

    def __init__(self, message, parameter=None, index=None):
        super().__init__(message)
        self.parameter = parameter
        self.index = index


class NumericalFailure(QVerifyError):
    """Evaluation could not reach the requested accuracy."""


class DivergenceError(NumericalFailure):
    """A series or limit shows no sign of converging."""


class PrecisionLossError(NumericalFailure):
    """Cancellation consumed more bits than the working precision can spare."""


class EscalationExhausted(NumericalFailure):
    """Precision escalation hit its cap without an accepted result."""


class ExtrapolationError(NumericalFailure):
    """Richardson extrapolation produced no convergence signal."""


class DegenerateError(QVerifyError, ValueError):
    """A coefficient problem is degenerate (e.g. r1 identically 1)."""


class NoSolutionError(QVerifyError, ValueError):
    """A coefficient problem has no admissible solution."""


class RejectedPointError(QVerifyError, ValueError):
    """A parameter point violates a constraint of an identity."""

    def __init__(self, message, predicate=None):
        super().__init__(message)
        self.predicate = predicate


class SamplerStarvation(QVerifyError, RuntimeError):
    """Rejection sampling failed to find an admissible point."""
