"""Exception hierarchy.

Validation problems (bad input data) and numerical problems (a computation
that could not be completed) are kept in separate branches so that callers,
the CLI in particular, can map them to distinct exit codes.
"""


class QPError(Exception):
    """Base class for every error raised by qpstab."""


class ValidationError(QPError, ValueError):
    """Input data does not describe a valid quasipolynomial system."""


class DimensionMismatch(ValidationError):
    pass


class RankDeficientB(ValidationError):
    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class NonFiniteEntry(ValidationError):
    pass


class ParseError(ValidationError):
    """A system-definition file could not be read or is malformed."""


class NumericalError(QPError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy answer."""


class ExtensionFailed(NumericalError):
    pass


class NotAnEquilibrium(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoConvergence(NumericalError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularJacobian(NumericalError):
    pass


class EigenFailure(NumericalError):
    pass


class VerificationMismatch(NumericalError):
    pass


class StepSizeUnderflow(NumericalError):
    """Integrator step collapsed; ``record`` holds the partial trajectory."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class NonFiniteState(NumericalError):
    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class HypothesisNotMet(QPError):
    """A check was requested whose mathematical precondition does not hold."""
