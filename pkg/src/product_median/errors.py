"""Exception and warning types raised across the package."""


class ProductMedianError(Exception):
    """Base class for all package errors."""


class InvalidInput(ProductMedianError, ValueError):
    pass


class ShapeError(ProductMedianError, ValueError):
    pass


class NotSpd(ProductMedianError, ValueError):
    pass


class LeftManifold(ProductMedianError, ArithmeticError):
    """An exponential step left the manifold (tangent too large)."""


class AntipodalPoint(ProductMedianError, ValueError):
    """The sphere logarithm is undefined for (near-)antipodal points."""


class UnavailableCurvature(ProductMedianError):
    """A factor has no configured sectional-curvature upper bound."""


class CoincidentIterate(ProductMedianError, ZeroDivisionError):
    """A Weiszfeld weight was requested at a data point without regularization."""


class NonConvergence(ProductMedianError, RuntimeError):
    """An iteration hit its cap; the last iterate is kept on ``.last``."""

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class ClampWarning(UserWarning):
    """A positive half-line step was clamped to stay positive."""
