"""Exception types shared across the toolkit."""


class RVMLError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgumentError(RVMLError, ValueError):
    """An argument is non-finite, out of its admissible set, or malformed."""


class SingularPointError(RVMLError, ArithmeticError):
    """The collision kernel was evaluated at coincident momenta."""


class ResolutionError(RVMLError):
    """A grid is too coarse for the requested quadrature."""


class ShapeMismatchError(RVMLError, ValueError):
    """Fields live on incompatible grids."""


class StateError(RVMLError):
    """A required precomputed quantity is missing."""


class DegenerateCoefficientsError(RVMLError):
    """An assembled diffusion matrix lost ellipticity.

    Attributes
    ----------
    node : tuple
        Multi-index of the first offending node.
    min_eigenvalue : float
        Smallest eigenvalue found there.
    """

    def __init__(self, message, node=None, min_eigenvalue=None):
        super().__init__(message)
        self.node = node
        self.min_eigenvalue = min_eigenvalue


class ChartDomainError(RVMLError):
    """A point lies outside the region where a boundary chart is invertible."""


class OutOfRangeError(RVMLError, ValueError):
    """A compactified momentum lies outside the image of the momentum map."""


class ConsistencyError(RVMLError):
    """Div-curl targets are incompatible.

    Attributes
    ----------
    residuals : dict
        Named residual norms describing the incompatibility.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class ConfigurationError(RVMLError):
    """A configuration value is invalid (time step, file contents, ...)."""


class SolverError(RVMLError):
    """An iterative linear solve did not converge."""


class NumericalOverflowError(RVMLError, ArithmeticError):
    """A computed quantity became non-finite."""


class InsufficientHistoryError(RVMLError):
    """Too few stored time levels for the requested derivative order."""


class DivergenceError(RVMLError):
    """The Picard iteration left its energy budget.

    Attributes
    ----------
    trace : object
        The partial iteration trace up to the failing iterate.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
