"""Exception hierarchy shared by all oplab modules."""


class OplabError(Exception):
    """Base class for all oplab errors."""


class DegenerateInputError(OplabError):
    """Raised when an input is numerically degenerate (pole proximity,
    duplicate zeros, empty grids after skipping, ...)."""


class PoleLocationError(OplabError):
    """Raised when a rational function has a pole in the closed unit disk."""


class ConvergenceError(OplabError):
    """Raised when an iterative or adaptive computation fails its
    stability criterion (quadrature doubling, Stein iteration, ...)."""


class SpectralRadiusError(OplabError):
    """Raised when an operator violates a spectral-radius precondition.

    Carries the offending radius estimate in ``radius``.
    """

    def __init__(self, msg, radius=None):
        super().__init__(msg)
        self.radius = radius


class DivergenceError(OplabError):
    """Raised when a power scan overflows its norm cap.

    ``step`` records the power at which the overflow occurred.
    """

    def __init__(self, msg, step=None, norm=None):
        super().__init__(msg)
        self.step = step
        self.norm = norm


class InfeasibleError(OplabError):
    """Raised when an interpolation problem admits no bounded solution
    below the search cap."""


class NotAContractionError(OplabError):
    """Raised when an operator required to be a contraction is not."""


class DimensionError(OplabError):
    """Raised on nonconforming block or matrix dimensions."""


class InvariantViolation(OplabError):
    """Raised when a documented type invariant fails at construction."""
