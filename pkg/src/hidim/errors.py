"""Exception hierarchy shared by every module of the package."""


class HidimError(Exception):
    """Base class for all package errors."""


class DomainError(HidimError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ConstructionError(HidimError, ValueError):
    """An object could not be built from the supplied data."""


class ConvexityError(ConstructionError):
    """A function that must be convex is not.

    Attributes
    ----------
    region : tuple of float or None
        ``(lo, hi)`` abscissa interval where the violation was found.
    violation : float
        Largest slope decrease encountered.
    """

    def __init__(self, message, region=None, violation=0.0):
        super().__init__(message)
        self.region = region
        self.violation = violation


class NumericalError(HidimError, RuntimeError):
    """A numerical procedure failed to reach its accuracy target.

    ``diagnostics`` carries whatever the failing routine could report
    (estimates at successive refinements, residual history, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConvergenceError(NumericalError):
    """An iterative solver stopped before meeting its tolerance.

    ``trace`` is the list of iterates or residuals recorded on the way.
    """

    def __init__(self, message, trace=None, diagnostics=None):
        super().__init__(message, diagnostics)
        self.trace = list(trace or [])


class DegenerateError(NumericalError):
    """The problem is degenerate (vanishing curvature, singular design...)."""


class ConfigError(HidimError, ValueError):
    """A configuration document is invalid."""
