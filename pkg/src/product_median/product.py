"""Product manifolds, weighted samples, and curvature/uniqueness diagnostics.

A product point is a tuple with one component per factor; a product tangent is a
tuple of factor tangents at the matching components. Distances combine as the
l2 norm of the factor distances.
"""

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInput, ProductMedianError, ShapeError, UnavailableCurvature
from .manifolds import UNBOUNDED, Factor

WEIGHT_SUM_SLACK = 1e-6


@contextmanager
def at_factor(j):
    """Tag package errors raised inside the block with the factor index ``j``."""
    try:
        yield
    except ProductMedianError as exc:
        if getattr(exc, "factor_index", None) is None:
            exc.factor_index = j
            head = exc.args[0] if exc.args else ""
            exc.args = (f"factor {j}: {head}",) + exc.args[1:]
        raise


class ProductManifold:
    """Ordered product of factor manifolds with the product metric.

    Examples
    --------
    >>> pm = ProductManifold([Euclidean(1), PositiveHalfLine()])
    >>> pm.dist((np.array([0.0]), 1.0), (np.array([3.0]), 5.0))
    5.0
    """

    def __init__(self, factors: Sequence[Factor]):
        factors = tuple(factors)
        if not factors:
            raise InvalidInput("a product needs at least one factor")
        for f in factors:
            if not isinstance(f, Factor):
                raise InvalidInput(f"not a factor manifold: {f!r}")
        self.factors = factors

    def __repr__(self):
        return "ProductManifold(" + " x ".join(f.describe() for f in self.factors) + ")"

    def __eq__(self, other):
        return isinstance(other, ProductManifold) and self.factors == other.factors

    def __hash__(self):
        return hash(self.factors)

    def __len__(self):
        return len(self.factors)

    # -- validation -----------------------------------------------------------

    def _components(self, z, what="point"):
        if len(z) != len(self.factors):
            raise ShapeError(f"{what} has {len(z)} components, product has {len(self.factors)} factors")
        return z

    def check_point(self, z):
        z = self._components(z)
        out = []
        for j, (f, c) in enumerate(zip(self.factors, z)):
            with at_factor(j):
                out.append(f.check_point(c))
        return tuple(out)

    def check_tangent(self, z, v):
        v = self._components(v, "tangent")
        out = []
        for j, (f, p, c) in enumerate(zip(self.factors, z, v)):
            with at_factor(j):
                out.append(f.check_tangent(p, c))
        return tuple(out)

    def stack(self, points):
        """Per-factor stacked arrays for a list of product points."""
        return tuple(f.stack([z[j] for z in points]) for j, f in enumerate(self.factors))

    @staticmethod
    def unstack(stacks, i):
        return tuple(float(S[i]) if S.ndim == 1 else S[i].copy() for S in stacks)

    # -- metric ---------------------------------------------------------------

    def factor_dists(self, a, b):
        self._components(a)
        self._components(b)
        out = []
        for j, f in enumerate(self.factors):
            with at_factor(j):
                out.append(f.dist(a[j], b[j]))
        return out

    def dist(self, a, b) -> float:
        return math.sqrt(sum(d * d for d in self.factor_dists(a, b)))

    def factor_dists_many(self, z, stacks):
        """Array of shape ``(k, n)``: factor distances from ``z`` to each stacked point."""
        rows = []
        for j, (f, S) in enumerate(zip(self.factors, stacks)):
            with at_factor(j):
                rows.append(f.dists(z[j], S))
        return np.array(rows)

    def dists(self, z, stacks):
        fd = self.factor_dists_many(z, stacks)
        return np.sqrt(np.sum(fd * fd, axis=0))

    def exp(self, z, v):
        self._components(v, "tangent")
        out = []
        for j, (f, p, c) in enumerate(zip(self.factors, z, v)):
            with at_factor(j):
                out.append(f.exp(p, c))
        return tuple(out)

    def log(self, z, x):
        self._components(x)
        out = []
        for j, (f, p, c) in enumerate(zip(self.factors, z, x)):
            with at_factor(j):
                out.append(f.log(p, c))
        return tuple(out)

    def logs(self, z, stacks):
        """Per-factor stacks of logarithms at ``z``."""
        out = []
        for j, (f, p, S) in enumerate(zip(self.factors, z, stacks)):
            with at_factor(j):
                out.append(f.logs(p, S))
        return tuple(out)

    def dists_logs(self, z, stacks):
        """Product distances ``(n,)`` and per-factor log stacks from ``z``."""
        sq = 0.0
        logs = []
        for j, (f, p, S) in enumerate(zip(self.factors, z, stacks)):
            with at_factor(j):
                d, L = f.dists_logs(p, S)
            sq = sq + d * d
            logs.append(L)
        return np.sqrt(sq), tuple(logs)

    def inner(self, z, u, v) -> float:
        return sum(f.inner(p, a, b) for f, p, a, b in zip(self.factors, z, u, v))

    def norm(self, z, v) -> float:
        return math.sqrt(max(self.inner(z, v, v), 0.0))

    # -- tangent arithmetic ---------------------------------------------------

    def zero_tangent(self, z):
        return tuple(f.zero_tangent(p) for f, p in zip(self.factors, z))

    @staticmethod
    def scale(v, c):
        return tuple(c * x for x in v)

    @staticmethod
    def add(u, v):
        return tuple(a + b for a, b in zip(u, v))

    def random_tangent(self, z, rng):
        """Random unit-norm tangent at ``z``."""
        c = rng.standard_normal(len(self.factors))
        c /= np.linalg.norm(c)
        return tuple(cj * f.random_tangent(p, rng) for cj, f, p in zip(c, self.factors, z))

    def escape_direction(self, z):
        """Unit tangent along the first non-compact factor (zero on the others)."""
        for j, f in enumerate(self.factors):
            if not f.compact:
                v = list(self.zero_tangent(z))
                v[j] = f.escape_direction(z[j])
                return tuple(v)
        raise InvalidInput("every factor is compact; nothing can escape to infinity")

    # -- curvature diagnostics ------------------------------------------------

    def curvature_upper(self) -> float:
        """Sectional-curvature upper bound of the product: the max over factors."""
        bounds = []
        for j, f in enumerate(self.factors):
            k = f.curvature_upper()
            if k is None:
                raise UnavailableCurvature(f"factor {j} ({f.describe()}) has no curvature bound")
            bounds.append(max(float(k), 0.0))
        return max(bounds)

    def uniqueness_radius(self, center) -> float:
        """Radius of a ball around ``center`` inside which the median is unique.

        ``min(inj_1(c_1), ..., inj_k(c_k), pi / (4 sqrt(kappa)))``, where the last
        term is dropped for ``kappa = 0``. Returns ``math.inf`` when unbounded.
        """
        kappa = self.curvature_upper()
        terms = [f.injectivity_radius(c) for f, c in zip(self.factors, center)]
        if kappa > 0:
            terms.append(math.pi / (4.0 * math.sqrt(kappa)))
        return min(terms)

    @property
    def is_hadamard(self):
        try:
            return self.curvature_upper() <= 0.0
        except UnavailableCurvature:
            return False


class WeightedSample:
    """Points on a product manifold with positive weights summing to one.

    Weights within ``1e-6`` (but not ``1e-12``) of summing to one are renormalized; anything further
    off is rejected (use :meth:`normalized` for arbitrary positive weights).
    ``weights=None`` means uniform.
    """

    def __init__(self, manifold: ProductManifold, points, weights=None):
        points = [manifold.check_point(z) for z in points]
        if not points:
            raise InvalidInput("a sample needs at least one point")
        n = len(points)
        if weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
            if w.shape != (n,):
                raise ShapeError(f"{n} points but {w.size} weights")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise InvalidInput("weights must be finite and positive")
            if abs(w.sum() - 1.0) > WEIGHT_SUM_SLACK:
                raise InvalidInput(f"weights sum to {float(w.sum()):.17g}, expected 1")
        self.manifold = manifold
        self.points = tuple(points)
        # already-normalized weights are kept bit for bit
        self.weights = w / w.sum() if abs(w.sum() - 1.0) > 1e-12 else w.copy()
        self.weights.setflags(write=False)
        self.stacks = manifold.stack(self.points)

    @classmethod
    def normalized(cls, manifold, points, weights):
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0):
            raise InvalidInput("weights must be positive")
        return cls(manifold, points, w / w.sum())

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"WeightedSample(n={len(self)}, manifold={self.manifold!r})"


@dataclass(frozen=True)
class BallReport:
    """Outcome of :func:`ball_containment_report`.

    ``radius`` is ``None`` and ``verdict`` is ``None`` when the curvature bound is
    unavailable (inconclusive).
    """

    center: tuple
    max_dist: float
    radius: Optional[float]
    verdict: Optional[bool]

    @property
    def inconclusive(self):
        return self.verdict is None


def ball_containment_report(manifold: ProductManifold, sample: WeightedSample, center=None) -> BallReport:
    """Check whether the sample lies in a ball around ``center`` where the median is unique.

    The default center is the product Frechet mean of the sample.
    """
    if center is None:
        from .frechet import product_mean

        center = product_mean(manifold, sample)
    center = manifold.check_point(center)
    max_dist = float(np.max(manifold.dists(center, sample.stacks)))
    try:
        radius = manifold.uniqueness_radius(center)
    except UnavailableCurvature:
        return BallReport(center, max_dist, None, None)
    return BallReport(center, max_dist, radius, bool(max_dist < radius))


__all__ = [
    "UNBOUNDED",
    "BallReport",
    "ProductManifold",
    "WeightedSample",
    "at_factor",
    "ball_containment_report",
]
