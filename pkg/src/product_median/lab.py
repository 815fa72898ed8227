"""Contamination experiments on Gaussian parameter spaces.

Univariate Gaussians ``N(mu, sigma^2)`` live on ``R x (0, inf)`` in ``(mu, sigma)``
coordinates, where the 2-Wasserstein distance is flat. Multivariate Gaussians
``N_d(mu, Sigma)`` live on ``R^d x SPD(d)`` with the Bures-Wasserstein metric on
the covariance.

Randomness is deterministic: each ``(alpha index, trial)`` cell of a sweep gets
its own Philox stream keyed by :func:`cell_seed`, so results do not depend on the
number of worker threads.
"""

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import linalg
from .errors import InvalidInput, NonConvergence, NotSpd
from .frechet import factor_mean, product_mean
from .manifolds import Euclidean, PositiveHalfLine, SpdBuresWasserstein
from .product import ProductManifold, WeightedSample, ball_containment_report
from .solvers import SolverConfig, geometric_median

MASK64 = (1 << 64) - 1
MAX_ALPHA = 0.49
THREADS_ENV = "PRODUCT_MEDIAN_THREADS"

UNIVARIATE = ProductManifold([Euclidean(1), PositiveHalfLine()])
#: modal signal parameters, reading N(-1, 1/2) as variance 1/2
UNIVARIATE_REFERENCE = (np.array([-1.0]), math.sqrt(0.5))


def mix64(x: int) -> int:
    """SplitMix64 finalizer: a fixed bijective 64-bit mix."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def cell_seed(seed: int, alpha_index: int, trial: int) -> int:
    return mix64(mix64(mix64(seed & MASK64) ^ alpha_index) ^ trial)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed & MASK64))


def _beta55(rng, size):
    a = rng.standard_gamma(5.0, size)
    b = rng.standard_gamma(5.0, size)
    return a / (a + b)


def multivariate_manifold(d: int) -> ProductManifold:
    return ProductManifold([Euclidean(d), SpdBuresWasserstein(d)])


def multivariate_reference(d: int):
    return (np.zeros(d), np.eye(d))


def ar1_covariance(d: int, rho: float):
    """AR(1) covariance ``Sigma[i, j] = rho ** |i - j|``."""
    if d < 1:
        raise InvalidInput("d must be positive")
    if not 0.0 < rho < 1.0:
        raise InvalidInput(f"rho must lie in (0, 1), got {rho}")
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def sample_univariate(kind: str, rng, size: Optional[int] = None):
    """Draw ``(mu, sigma)`` Gaussian parameters.

    ``signal``: ``mu ~ N(-1, 1/4)``, ``sigma^2 ~ Beta(5, 5)``.
    ``noise``: ``mu ~ N(5, 1)``, ``sigma^2 ~ 5 Beta(5, 5)``.

    Returns one product point, or a list of ``size`` of them.
    """
    if kind == "signal":
        loc, sd, scale = -1.0, 0.5, 1.0
    elif kind == "noise":
        loc, sd, scale = 5.0, 1.0, 5.0
    else:
        raise InvalidInput(f"kind must be 'signal' or 'noise', got {kind!r}")
    m = 1 if size is None else size
    mu = loc + sd * rng.standard_normal(m)
    sigma = np.sqrt(scale * _beta55(rng, m))
    pts = [(np.array([mu[i]]), float(sigma[i])) for i in range(m)]
    return pts[0] if size is None else pts


def sample_multivariate(kind: str, d: int, rho: float, rng):
    """MLE ``(mean, covariance)`` from ``2d`` draws of the signal or noise law.

    Signal draws come from ``N_d(0, I)``, noise draws from ``N_d(10 * 1, AR1(rho))``.
    A singular covariance is redrawn once before :class:`NotSpd` is raised.
    """
    if d < 2:
        raise InvalidInput("multivariate sampling needs d >= 2")
    if kind == "signal":
        mean, chol = np.zeros(d), np.eye(d)
    elif kind == "noise":
        mean, chol = np.full(d, 10.0), np.linalg.cholesky(ar1_covariance(d, rho))
    else:
        raise InvalidInput(f"kind must be 'signal' or 'noise', got {kind!r}")
    m = 2 * d
    for attempt in range(2):
        V = mean + rng.standard_normal((m, d)) @ chol.T
        vbar = V.mean(axis=0)
        C = V - vbar
        cov = linalg.symmetrize(C.T @ C / m)
        if linalg.is_spd(cov):
            return vbar, cov
    raise NotSpd("degenerate covariance MLE after one redraw")


def contaminate(sample: WeightedSample, alpha: float, noise_source: Callable, rng) -> WeightedSample:
    """Replace ``floor(alpha * n)`` points, chosen uniformly without replacement,
    by draws from ``noise_source(rng, k)``. Weights are unchanged.
    """
    if not 0.0 <= alpha < 1.0:
        raise InvalidInput(f"alpha must lie in [0, 1), got {alpha}")
    n = len(sample)
    k = math.floor(round(alpha * n, 9))
    if k == 0:
        return sample
    idx = np.sort(rng.choice(n, size=k, replace=False))
    noise = noise_source(rng, k)
    points = list(sample.points)
    for i, p in zip(idx, noise):
        points[i] = p
    return WeightedSample(sample.manifold, points, sample.weights)


def estimation_error(manifold: ProductManifold, estimate, reference) -> float:
    return manifold.dist(estimate, reference)


# -- sweeps -----------------------------------------------------------------------


@dataclass(frozen=True)
class ContaminationSpec:
    """Generative design of a contamination sweep."""

    n: int = 1000
    alpha_grid: tuple = tuple(round(0.05 * i, 2) for i in range(10))
    trials: int = 5
    seed: int = 0
    scenario: str = "univariate"
    d: int = 5
    rho: float = 0.5
    reference: Optional[tuple] = None

    def __post_init__(self):
        if self.n < 1 or self.trials < 1:
            raise InvalidInput("n and trials must be positive")
        if not self.alpha_grid:
            raise InvalidInput("alpha_grid is empty")
        for a in self.alpha_grid:
            if not 0.0 <= a <= MAX_ALPHA:
                raise InvalidInput(f"alpha {a} outside [0, {MAX_ALPHA}]")
        if self.scenario not in ("univariate", "multivariate"):
            raise InvalidInput(f"unknown scenario {self.scenario!r}")
        if self.scenario == "multivariate":
            if self.d < 2:
                raise InvalidInput("multivariate scenario needs d >= 2")
            ar1_covariance(self.d, self.rho)

    @property
    def manifold(self):
        return UNIVARIATE if self.scenario == "univariate" else multivariate_manifold(self.d)

    def reference_point(self):
        if self.reference is not None:
            return self.manifold.check_point(self.reference)
        return UNIVARIATE_REFERENCE if self.scenario == "univariate" else multivariate_reference(self.d)

    def draw(self, kind, rng, k):
        if self.scenario == "univariate":
            return sample_univariate(kind, rng, k)
        return [sample_multivariate(kind, self.d, self.rho, rng) for _ in range(k)]


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    trial: int
    estimator: str
    error: float
    termination: str


@dataclass
class SweepResult:
    spec: ContaminationSpec
    rows: list = field(default_factory=list)

    def mean_error(self, estimator: str) -> dict:
        """Mean error over trials, keyed by alpha."""
        acc = {}
        for r in self.rows:
            if r.estimator == estimator:
                acc.setdefault(r.alpha, []).append(r.error)
        return {a: float(np.mean(v)) for a, v in acc.items()}


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, threads)


def _sweep_cell(spec, cfg, ai, alpha, trial):
    manifold = spec.manifold
    ref = spec.reference_point()
    rng = make_rng(cell_seed(spec.seed, ai, trial))
    sample = WeightedSample(manifold, spec.draw("signal", rng, spec.n))
    sample = contaminate(sample, alpha, lambda r, k: spec.draw("noise", r, k), rng)
    mean, mean_status = _mean_with_status(manifold, sample)
    mean_status = "ClosedForm" if spec.scenario == "univariate" else mean_status
    report = geometric_median(manifold, sample, init=mean, cfg=cfg)
    return [
        SweepRow(alpha, trial, "frechet_mean", estimation_error(manifold, mean, ref), mean_status),
        SweepRow(alpha, trial, "geometric_median", estimation_error(manifold, report.minimizer, ref), str(report.termination)),
    ]


def _mean_with_status(manifold, sample):
    """Product mean, keeping the last iterate of a factor mean that hit its cap."""
    out, status = [], "Converged"
    for f, X in zip(manifold.factors, sample.stacks):
        try:
            out.append(factor_mean(f, X, sample.weights))
        except NonConvergence as exc:
            out.append(exc.last)
            status = "NonConvergence"
    return tuple(out), status


def run_sweep(spec: ContaminationSpec, solver_cfg: SolverConfig = None, threads: Optional[int] = None) -> SweepResult:
    """Frechet mean vs geometric median error over a grid of contamination levels.

    For every ``(alpha, trial)`` a clean signal sample of size ``n`` is drawn,
    ``floor(alpha n)`` points are replaced by noise, and both estimators are
    compared with the reference point. The median uses the hybrid solver unless
    ``solver_cfg`` says otherwise. Output rows are ordered by ``(alpha, trial)``
    regardless of ``threads`` (default: ``$PRODUCT_MEDIAN_THREADS`` or 1).
    """
    cfg = solver_cfg or SolverConfig(method="hybrid")
    cells = [(ai, a, t) for ai, a in enumerate(spec.alpha_grid) for t in range(spec.trials)]
    n_threads = _threads(threads)
    if n_threads == 1:
        chunks = [_sweep_cell(spec, cfg, *c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            chunks = list(pool.map(lambda c: _sweep_cell(spec, cfg, *c), cells))
    return SweepResult(spec, [row for chunk in chunks for row in chunk])


# -- probes -----------------------------------------------------------------------


@dataclass
class BreakdownResult:
    weight: float
    diameter: float
    rows: list  # (R, distance of the median to the nearest clean point)

    @property
    def bound(self):
        """``diam / (1 - 2 W)`` for ``W < 1/2``; the lower-bound slack ``W_J diam / (2W - 1)`` otherwise."""
        if self.weight < 0.5:
            return self.diameter / (1.0 - 2.0 * self.weight)
        return (1.0 - self.weight) * self.diameter / (2.0 * self.weight - 1.0)


def diameter(manifold: ProductManifold, sample: WeightedSample) -> float:
    return max(float(np.max(manifold.dists(z, sample.stacks))) for z in sample.points)


def _distance_to_set(manifold, z, stacks):
    return float(np.min(manifold.dists(z, stacks)))


def place_at_distance(manifold, center, direction, stacks, R, tol=1e-10):
    """Point ``exp_c(t u)`` whose distance to the stacked set is ``R`` (bisection on ``t``).

    If ``R`` is below the distance of ``center`` itself, ``center`` is returned.
    """
    f = lambda t: _distance_to_set(manifold, manifold.exp(center, manifold.scale(direction, t)), stacks)
    if R <= f(0.0):
        return center
    lo, hi = 0.0, R + float(np.max(manifold.dists(center, stacks)))
    while f(hi) < R:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < R:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, R):
            break
    return manifold.exp(center, manifold.scale(direction, hi))


def breakdown_probe(
    manifold: ProductManifold,
    clean: WeightedSample,
    weight: float,
    radii: Sequence[float],
    cfg: SolverConfig = None,
    direction=None,
) -> BreakdownResult:
    """Median displacement when total weight ``weight`` sits on one far-away point.

    The clean weights are scaled by ``1 - weight`` and a contaminant of weight
    ``weight`` is placed along a fixed geodesic from the clean Frechet mean at
    distance ``R`` from the clean set. For each ``R`` the median's distance to
    the nearest clean point is recorded.
    """
    if not 0.0 < weight < 1.0 or weight == 0.5:
        raise InvalidInput("weight must lie in (0, 1) and differ from 1/2")
    cfg = cfg or SolverConfig(method="weiszfeld")
    center = product_mean(manifold, clean)
    u = manifold.escape_direction(center) if direction is None else manifold.check_tangent(center, direction)
    u = manifold.scale(u, 1.0 / manifold.norm(center, u))
    rows = []
    for R in radii:
        zc = place_at_distance(manifold, center, u, clean.stacks, float(R))
        sample = WeightedSample(
            manifold, list(clean.points) + [zc], np.append((1.0 - weight) * clean.weights, weight)
        )
        report = geometric_median(manifold, sample, cfg=cfg)
        rows.append((float(R), _distance_to_set(manifold, report.minimizer, clean.stacks)))
    return BreakdownResult(weight, diameter(manifold, clean), rows)


@dataclass
class PerturbationResult:
    rows: list  # (epsilon, mean displacement)
    slope: float
    in_uniqueness_ball: Optional[bool]


def perturbation_probe(
    manifold: ProductManifold,
    sample: WeightedSample,
    epsilons: Sequence[float],
    rng,
    trials: int = 20,
    cfg: SolverConfig = None,
) -> PerturbationResult:
    """Median displacement under random data perturbations of size ``epsilon``.

    Every datum moves along a random unit tangent by ``epsilon``; the median is
    re-solved from the unperturbed median and its displacement averaged over
    ``trials``. ``slope`` is the least-squares slope of log displacement against
    log epsilon over the positive entries.
    """
    cfg = cfg or SolverConfig(method="weiszfeld", tol_residual=1e-12)
    if manifold.is_hadamard:
        inside = True
    else:
        inside = ball_containment_report(manifold, sample).verdict
        if not inside:
            warnings.warn("sample not certified inside a uniqueness ball; the median may jump", stacklevel=2)
    base = geometric_median(manifold, sample, cfg=cfg).minimizer
    rows = []
    for eps in epsilons:
        disp = []
        for _ in range(trials):
            moved = [manifold.exp(z, manifold.scale(manifold.random_tangent(z, rng), eps)) for z in sample.points]
            perturbed = WeightedSample(manifold, moved, sample.weights)
            disp.append(manifold.dist(geometric_median(manifold, perturbed, init=base, cfg=cfg).minimizer, base))
        rows.append((float(eps), float(np.mean(disp))))
    pos = [(e, m) for e, m in rows if e > 0 and m > 0]
    slope = float(np.polyfit(np.log([e for e, _ in pos]), np.log([m for _, m in pos]), 1)[0]) if len(pos) >= 2 else math.nan
    return PerturbationResult(rows, slope, inside)
