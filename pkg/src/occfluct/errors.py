"""Exception hierarchy shared by all modules."""


class OccFluctError(Exception):
    """Base class for package errors."""


class DomainError(OccFluctError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedError(DomainError):
    """The requested parameter combination is not implemented."""


class RegimeError(DomainError):
    """Model parameters are incompatible with the requested dimension regime."""


class NumericError(OccFluctError, ArithmeticError):
    """A quadrature or inversion failed to reach its accuracy target.

    ``diagnostics`` carries whatever the failing routine measured.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class AccuracyError(NumericError):
    """A discretization is too coarse for the requested kernel."""


class EstimationError(OccFluctError, ValueError):
    """A statistical estimator has degenerate input."""


class ResourceError(OccFluctError, RuntimeError):
    """A simulation exceeded its memory budget.

    ``partial`` holds the results accumulated before the budget was hit.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
