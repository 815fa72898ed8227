"""Geometric medians and Frechet means on product Riemannian manifolds."""

from .errors import (
    AntipodalPoint,
    ClampWarning,
    CoincidentIterate,
    InvalidInput,
    LeftManifold,
    NonConvergence,
    NotSpd,
    ProductMedianError,
    ShapeError,
    UnavailableCurvature,
)
from .frechet import factor_mean, product_mean
from .manifolds import UNBOUNDED, Euclidean, Factor, PositiveHalfLine, Sphere, SpdBuresWasserstein
from .product import BallReport, ProductManifold, WeightedSample, ball_containment_report
from .solvers import (
    SolverConfig,
    SolverReport,
    Termination,
    datum_optimality,
    geometric_median,
    hybrid_solve,
    min_norm_subgradient,
    objective,
    subgradient_solve,
    weiszfeld_solve,
    weiszfeld_weights,
)

__version__ = "0.1.0"
