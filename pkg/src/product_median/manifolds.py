"""Factor manifolds: Euclidean space, the positive half-line, the unit sphere and
SPD matrices with the Bures-Wasserstein metric.

Points and tangent vectors are plain numpy objects:

===========================  ====================  =====================
factor                       point                 tangent
===========================  ====================  =====================
:class:`Euclidean`           ``(dim,)`` array      ``(dim,)`` array
:class:`PositiveHalfLine`    float ``> 0``         float
:class:`Sphere`              unit ``(dim,)``       ``(dim,)``, ``<v,p> = 0``
:class:`SpdBuresWasserstein` SPD ``(dim, dim)``    symmetric ``(dim, dim)``
===========================  ====================  =====================

Every factor also offers batched ``dists``/``logs`` taking a stack of points
(``stack`` builds one), which the solvers use for speed.
"""

import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np

from . import linalg
from .errors import AntipodalPoint, ClampWarning, InvalidInput, LeftManifold, NotSpd, ShapeError

#: injectivity radius of factors whose exponential map is a global diffeomorphism
UNBOUNDED = math.inf

SPHERE_NORM_TOL = 1e-10
ANTIPODAL_TOL = 1e-10
HALF_LINE_FLOOR = 1e-9


class Factor(ABC):
    """A complete Riemannian manifold used as one factor of a product."""

    kind: ClassVar[str]
    compact: ClassVar[bool] = False

    @property
    @abstractmethod
    def dim(self) -> int:
        """Coordinate (ambient) dimension."""

    @abstractmethod
    def check_point(self, p):
        """Validate ``p`` and return it in canonical numpy form."""

    def check_tangent(self, p, v):
        v = np.asarray(v, dtype=float)
        if v.shape != np.shape(p):
            raise ShapeError(f"{self.kind}: tangent shape {v.shape} != point shape {np.shape(p)}")
        if not np.all(np.isfinite(v)):
            raise InvalidInput(f"{self.kind}: non-finite tangent")
        return v

    def stack(self, points):
        return np.stack([np.asarray(p, dtype=float) for p in points])

    def zero_tangent(self, p):
        return np.zeros_like(np.asarray(p, dtype=float))

    @abstractmethod
    def dist(self, a, b) -> float: ...

    @abstractmethod
    def dists(self, p, X):
        """Distances from ``p`` to every point of the stack ``X``."""

    def dists_logs(self, p, X):
        """``(dists(p, X), logs(p, X))``; factors override it to share work."""
        return self.dists(p, X), self.logs(p, X)

    @abstractmethod
    def exp(self, p, v): ...

    @abstractmethod
    def log(self, p, x): ...

    @abstractmethod
    def logs(self, p, X):
        """Logarithms at ``p`` of every point of the stack ``X``."""

    def inner(self, p, u, v) -> float:
        return float(np.sum(np.asarray(u) * np.asarray(v)))

    def norm(self, p, v) -> float:
        return math.sqrt(max(self.inner(p, v, v), 0.0))

    def curvature_upper(self) -> Optional[float]:
        """Upper bound on sectional curvature, or ``None`` when not configured."""
        return 0.0

    def injectivity_radius(self, p) -> float:
        return UNBOUNDED

    @abstractmethod
    def random_tangent(self, p, rng):
        """A tangent at ``p`` with unit norm and uniformly random direction."""

    def escape_direction(self, p):
        """A fixed unit tangent along which geodesics run off to infinity."""
        raise InvalidInput(f"{self.kind} is compact; no escape direction")

    def describe(self) -> str:
        return f"{self.kind}({self.dim})"


def _as_vector(x, dim, kind):
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ShapeError(f"{kind}: expected shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput(f"{kind}: non-finite coordinates")
    return x


@dataclass(frozen=True)
class Euclidean(Factor):
    n: int = 1
    kind: ClassVar[str] = "euclidean"

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInput("Euclidean dimension must be positive")

    @property
    def dim(self):
        return self.n

    def check_point(self, p):
        return _as_vector(p, self.n, self.kind)

    def dist(self, a, b):
        return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))

    def dists(self, p, X):
        return np.linalg.norm(X - p, axis=-1)

    def exp(self, p, v):
        return p + v

    def log(self, p, x):
        return np.asarray(x, dtype=float) - p

    def logs(self, p, X):
        return X - p

    def random_tangent(self, p, rng):
        v = rng.standard_normal(self.n)
        return v / np.linalg.norm(v)

    def escape_direction(self, p):
        v = np.zeros(self.n)
        v[0] = 1.0
        return v


@dataclass(frozen=True)
class PositiveHalfLine(Factor):
    """``(0, inf)`` with the flat metric ``|s - t|``.

    This is the standard-deviation coordinate of univariate Gaussians under the
    2-Wasserstein distance. Exponential steps that would cross zero are clamped to
    ``HALF_LINE_FLOOR`` with a :class:`ClampWarning`.
    """

    kind: ClassVar[str] = "positive"

    @property
    def dim(self):
        return 1

    def check_point(self, p):
        s = np.asarray(p, dtype=float)
        if s.shape not in ((), (1,)):
            raise ShapeError(f"positive: expected a scalar, got shape {s.shape}")
        s = float(s.reshape(()))
        if not (math.isfinite(s) and s > 0):
            raise InvalidInput(f"positive: expected a finite value > 0, got {s}")
        return s

    def check_tangent(self, p, v):
        v = np.asarray(v, dtype=float)
        if v.shape not in ((), (1,)):
            raise ShapeError(f"positive: expected a scalar tangent, got shape {v.shape}")
        return float(v.reshape(()))

    def stack(self, points):
        return np.array([float(p) for p in points])

    def zero_tangent(self, p):
        return 0.0

    def dist(self, a, b):
        return abs(float(a) - float(b))

    def dists(self, p, X):
        return np.abs(X - p)

    def exp(self, p, v):
        s = float(p) + float(v)
        if s < HALF_LINE_FLOOR:
            warnings.warn(f"positive: step to {s:.3g} clamped to {HALF_LINE_FLOOR}", ClampWarning, stacklevel=2)
            s = HALF_LINE_FLOOR
        return s

    def log(self, p, x):
        return float(x) - float(p)

    def logs(self, p, X):
        return X - p

    def inner(self, p, u, v):
        return float(u) * float(v)

    def random_tangent(self, p, rng):
        return 1.0 if rng.random() < 0.5 else -1.0

    def escape_direction(self, p):
        return 1.0

    def describe(self):
        return self.kind


@dataclass(frozen=True)
class Sphere(Factor):
    """Unit sphere in ``R^n`` (so the manifold dimension is ``n - 1``)."""

    n: int = 3
    kind: ClassVar[str] = "sphere"
    compact: ClassVar[bool] = True

    def __post_init__(self):
        if self.n < 2:
            raise InvalidInput("Sphere needs ambient dimension >= 2")

    @property
    def dim(self):
        return self.n

    def check_point(self, p):
        p = _as_vector(p, self.n, self.kind)
        r = np.linalg.norm(p)
        if abs(r - 1.0) > SPHERE_NORM_TOL:
            raise InvalidInput(f"sphere: point has norm {float(r):.17g}, expected 1")
        return p / r

    def check_tangent(self, p, v):
        v = super().check_tangent(p, v)
        if abs(float(v @ p)) > 1e-10 * max(1.0, float(np.linalg.norm(v))):
            raise InvalidInput("sphere: tangent is not orthogonal to its base point")
        return v

    def dist(self, a, b):
        # 2*atan2(|a-b|, |a+b|) equals arccos(<a,b>) but stays accurate near 0 and pi,
        # and is exactly symmetric in (a, b).
        a = np.asarray(a)
        b = np.asarray(b)
        return float(2.0 * math.atan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))

    def dists(self, p, X):
        return 2.0 * np.arctan2(np.linalg.norm(X - p, axis=-1), np.linalg.norm(X + p, axis=-1))

    def exp(self, p, v):
        t = float(np.linalg.norm(v))
        if t < 1e-14:
            return p
        out = math.cos(t) * p + math.sin(t) * (v / t)
        return out / np.linalg.norm(out)

    def log(self, p, x):
        return self.logs(p, np.asarray(x, dtype=float)[None, :])[0]

    def logs(self, p, X):
        if np.any(X @ p <= -1.0 + ANTIPODAL_TOL):
            raise AntipodalPoint("sphere: log undefined at an antipodal point")
        diff = X - p
        u = diff - np.outer(diff @ p, p)
        nu = np.linalg.norm(u, axis=-1)
        theta = self.dists(p, X)
        scale = np.divide(theta, nu, out=np.zeros_like(theta), where=nu > 0)
        return u * scale[:, None]

    def injectivity_radius(self, p):
        return math.pi

    def curvature_upper(self):
        return 1.0

    def random_tangent(self, p, rng):
        v = rng.standard_normal(self.n)
        v -= (v @ p) * p
        return v / np.linalg.norm(v)


@dataclass(frozen=True)
class SpdBuresWasserstein(Factor):
    """SPD ``n x n`` matrices (Gaussian covariances) with the Bures-Wasserstein metric.

    With ``L_S[V]`` the solution of ``L S + S L = V``:

    * ``<U, V>_S = tr(L_S[U] V) / 2``
    * ``exp_S(V) = S + V + L S L`` with ``L = L_S[V]``
    * ``log_S(X) = T S + S T - 2 S`` with ``T = S^{-1/2} (S^{1/2} X S^{1/2})^{1/2} S^{-1/2}``
    * ``d(A, B)^2 = tr(A + B - 2 (B^{1/2} A B^{1/2})^{1/2})``

    ``curvature_bound`` is an optional, user-supplied sectional-curvature upper
    bound used only by the uniqueness diagnostics; by default it is unavailable.
    """

    n: int = 2
    curvature_bound: Optional[float] = None
    kind: ClassVar[str] = "spd_bw"

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInput("SPD dimension must be positive")

    @property
    def dim(self):
        return self.n

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n, self.n):
            raise ShapeError(f"spd_bw: expected shape ({self.n}, {self.n}), got {p.shape}")
        return linalg.check_spd(p)

    def check_tangent(self, p, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n, self.n):
            raise ShapeError(f"spd_bw: expected tangent shape ({self.n}, {self.n}), got {v.shape}")
        return linalg.as_symmetric(v)

    def _transport(self, p, X):
        """Maps ``T_i`` with ``T_i p T_i = X_i``, and ``d(p, X_i)``.

        ``d^2 = |(T - I) p^{1/2}|_F^2`` equals the trace formula in the class
        docstring but is a sum of squares, so it does not cancel to round-off
        noise (about ``sqrt(eps tr p)``) when ``X_i`` is close to ``p``.
        """
        rp, irp = linalg.sqrt_and_inv_sqrt(p)
        T = linalg.symmetrize(irp @ linalg.sqrt_psd(rp @ X @ rp) @ irp)
        E = (T - np.eye(self.n)) @ rp
        d = np.sqrt(np.sum(E * E, axis=(-2, -1)))
        same = np.all(X == p, axis=(-2, -1))
        return np.where(same[..., None, None], np.eye(self.n), T), np.where(same, 0.0, d)

    def dist(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        # fixed argument order so that dist(a, b) and dist(b, a) agree bit for bit
        if a.tobytes() > b.tobytes():
            a, b = b, a
        return float(self._transport(a, b)[1])

    def dists(self, p, X):
        return self._transport(p, X)[1]

    def transport_maps(self, p, X):
        """Optimal maps ``T`` from ``N(0, p)`` to ``N(0, X_i)``, i.e. ``T p T = X_i``."""
        return self._transport(p, X)[0]

    def dists_logs(self, p, X):
        T, d = self._transport(p, X)
        return d, linalg.symmetrize(T @ p + p @ T - 2.0 * p)

    def exp(self, p, v):
        L = linalg.solve_lyapunov(p, v)
        A = np.eye(self.n) + L
        if np.linalg.eigvalsh(A)[0] <= 0.0:
            raise LeftManifold("spd_bw: geodesic leaves the SPD cone before t = 1")
        out = linalg.symmetrize(A @ p @ A)
        try:
            return linalg.check_spd(out)
        except NotSpd as exc:
            raise LeftManifold("spd_bw: exponential step is numerically singular") from exc

    def log(self, p, x):
        return self.logs(p, np.asarray(x, dtype=float)[None])[0]

    def logs(self, p, X):
        T = self.transport_maps(p, X)
        return linalg.symmetrize(T @ p + p @ T - 2.0 * p)

    def inner(self, p, u, v):
        L = linalg.solve_lyapunov(p, u)
        return 0.5 * float(np.sum(L * np.asarray(v)))

    def curvature_upper(self):
        return self.curvature_bound

    def random_tangent(self, p, rng):
        A = rng.standard_normal((self.n, self.n))
        v = linalg.symmetrize(A)
        return v / self.norm(p, v)

    def escape_direction(self, p):
        # exp_p(tV) = (I + tL) p (I + tL) with L = L_p[V] positive definite: never leaves
        v = np.eye(self.n)
        return v / self.norm(p, v)


_KINDS = {cls.kind: cls for cls in (Euclidean, PositiveHalfLine, Sphere, SpdBuresWasserstein)}


def make_factor(kind: str, dim: int = 1, **kwargs) -> Factor:
    """Build a factor from its serialized ``kind`` tag and dimension."""
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise InvalidInput(f"unknown factor type {kind!r}; expected one of {sorted(_KINDS)}") from None
    if cls is PositiveHalfLine:
        return cls()
    return cls(dim, **kwargs)
