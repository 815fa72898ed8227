"""Geometric median solvers on product manifolds.

The median objective ``F(z) = sum_i w_i d(z, x_i)`` couples the factors through
the product distance: the gradient contribution of datum ``i`` on every factor is
``-w_i log_z(x_i) / d(z, x_i)`` with the *joint* distance in the denominator.

Three solvers share one report format:

* :func:`subgradient_solve`: Riemannian subgradient descent with steps
  ``eta0 / sqrt(k + 1)``; returns the best iterate seen.
* :func:`weiszfeld_solve`: inverse-distance reweighted fixed point
  ``z <- exp_z(sum_i w~_i log_z(x_i))`` with damping, distance regularization,
  a datum-optimality test and an escape step when an iterate lands on a datum.
* :func:`hybrid_solve`: subgradient iterations until the residual is small,
  then Weiszfeld.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import CoincidentIterate, InvalidInput, LeftManifold
from .product import ProductManifold, WeightedSample

METHODS = ("subgradient", "weiszfeld", "hybrid")


class Termination(str, Enum):
    RESIDUAL_TOL = "ResidualTol"
    STEP_TOL = "StepTol"
    MAX_ITERS = "MaxIters"
    AT_DATUM = "AtDatum"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SolverConfig:
    """Solver hyperparameters.

    ``eta0=None`` selects the scale-aware default ``F(init) / max(1, n)``.
    ``coincidence_tol`` is scaled by ``max(1, max_i d(z, x_i))`` so that it stays
    above round-off for data far from the origin. ``selection`` picks the element
    of the ball terms ``w_i B`` at coincident data: ``"min_norm"`` (zero) or
    ``"random"`` (a random vector in the ball drawn from ``seed``).
    """

    method: str = "weiszfeld"
    max_iters: int = 10_000
    eta0: Optional[float] = None
    tol_step: float = 1e-12
    tol_residual: float = 1e-9
    weiszfeld_epsilon: float = 0.0
    coincidence_tol: float = 1e-11
    damping: float = 0.0
    hybrid_switch_residual: float = 1e-2
    hybrid_max_subgradient_iters: int = 50
    max_step_retries: int = 30
    selection: str = "min_norm"
    seed: int = 0
    record_iterates: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInput(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.max_iters < 1:
            raise InvalidInput("max_iters must be positive")
        if self.eta0 is not None and not self.eta0 > 0:
            raise InvalidInput("eta0 must be positive")
        for name in ("tol_step", "tol_residual", "hybrid_switch_residual"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{name} must be positive")
        if self.weiszfeld_epsilon < 0 or self.coincidence_tol < 0:
            raise InvalidInput("weiszfeld_epsilon and coincidence_tol must be nonnegative")
        if not 0.0 <= self.damping <= 1.0:
            raise InvalidInput("damping must lie in [0, 1]")
        if self.selection not in ("min_norm", "random"):
            raise InvalidInput("selection must be 'min_norm' or 'random'")


@dataclass
class SolverReport:
    """Result of a solver run.

    ``objective_trace[k]`` and ``residual_trace[k]`` are evaluated at iterate
    ``k``; ``residual`` is the min-norm subgradient norm at ``minimizer``.
    ``diagnostics`` carries the observed initial distance ``D`` to the returned
    point and the largest subgradient norm ``G`` seen along the path.
    """

    minimizer: tuple
    objective_trace: list
    residual_trace: list
    termination: Termination
    method: str
    residual: float = math.nan
    at_datum: Optional[int] = None
    switch_index: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    iterates: Optional[list] = None

    @property
    def iterations_used(self):
        return len(self.objective_trace)

    @property
    def best_objective(self):
        return min(self.objective_trace)

    @property
    def objective(self):
        """Objective value at the returned minimizer."""
        return self.diagnostics.get("objective", self.best_objective)


# -- objective and first-order information ------------------------------------


def objective(manifold: ProductManifold, sample: WeightedSample, z) -> float:
    """``sum_i w_i d(z, x_i)``."""
    return float(sample.weights @ manifold.dists(z, sample.stacks))


def _combine(manifold, coef, logs):
    """Tangent ``sum_i coef_i log_i`` from per-factor log stacks."""
    out = []
    for L in logs:
        t = np.tensordot(coef, L, axes=1)
        out.append(float(t) if np.ndim(t) == 0 else t)
    return tuple(out)


def _coincidence_threshold(d, tol):
    return tol * max(1.0, float(np.max(d)))


def _smooth_part(manifold, sample, d, logs, coincident):
    """``-sum_{i not coincident} w_i log_z(x_i) / d_i``."""
    safe = np.where(coincident, 1.0, d)
    coef = np.where(coincident, 0.0, -sample.weights / safe)
    return _combine(manifold, coef, logs)


def min_norm_subgradient(manifold: ProductManifold, sample: WeightedSample, z, coincidence_tol=0.0):
    """Subgradient of the median objective with zero selected from every ball term.

    Data at distance ``<= coincidence_tol`` from ``z`` contribute ``w_i B``, from
    which the zero vector is taken; every other datum contributes
    ``-w_i log_z(x_i) / d(z, x_i)`` on each factor. A factor on which ``z``
    coincides with the datum gets zero from that datum because its log vanishes.
    """
    d, logs = manifold.dists_logs(z, sample.stacks)
    return _smooth_part(manifold, sample, d, logs, d <= coincidence_tol)


def datum_optimality(manifold: ProductManifold, sample: WeightedSample, j: int, tol=1e-10, coincidence_tol=1e-11):
    """Test whether datum ``j`` is a geometric median.

    ``x_j`` is a minimizer iff ``0`` lies in the subdifferential there, i.e. the
    norm of the smooth part from the other data is at most the total weight of the
    data sitting at ``x_j``.

    Returns
    -------
    optimal : bool
    smooth_norm : float
    ball_weight : float
    """
    z = sample.points[j]
    d, logs = manifold.dists_logs(z, sample.stacks)
    coincident = d <= _coincidence_threshold(d, coincidence_tol)
    coincident[j] = True
    g = _smooth_part(manifold, sample, d, logs, coincident)
    gnorm = manifold.norm(z, g)
    ball = float(sample.weights[coincident].sum())
    return gnorm <= ball + tol, gnorm, ball


def weiszfeld_weights(manifold: ProductManifold, sample: WeightedSample, z, epsilon=0.0):
    """Adaptive Weiszfeld weights ``w~_i = (w_i / d_i) / sum_j (w_j / d_j)``.

    With ``epsilon > 0`` each ``d_i`` is replaced by ``max(d_i, epsilon)``.

    Raises
    ------
    CoincidentIterate
        If ``z`` coincides with a datum and ``epsilon == 0``.
    """
    return _weiszfeld_weights(sample.weights, manifold.dists(z, sample.stacks), epsilon)


def _weiszfeld_weights(w, d, epsilon):
    if epsilon > 0:
        d = np.maximum(d, epsilon)
    elif np.any(d <= 0):
        raise CoincidentIterate("iterate coincides with a datum; set weiszfeld_epsilon > 0")
    r = w / d
    return r / r.sum()


# -- shared machinery -----------------------------------------------------------


class _Run:
    """Trace bookkeeping shared by the solvers."""

    def __init__(self, manifold, sample, init, cfg, method):
        self.manifold = manifold
        self.sample = sample
        self.cfg = cfg
        self.method = method
        self.init = manifold.check_point(init)
        self.objectives = []
        self.residuals = []
        self.events = []
        self.iterates = [] if cfg.record_iterates else None

    def record(self, z, F, res):
        self.objectives.append(F)
        self.residuals.append(res)
        if self.iterates is not None:
            self.iterates.append(z)

    def step(self, z, v, shrink):
        """``exp_z(v)``, shrinking ``v`` by ``shrink`` after each exit from the manifold.

        Returns ``None`` when every retry failed.
        """
        for attempt in range(self.cfg.max_step_retries + 1):
            try:
                return self.manifold.exp(z, v)
            except LeftManifold as exc:
                self.events.append(f"iteration {len(self.objectives) - 1}: {exc}; retry {attempt + 1}")
                v = self.manifold.scale(v, shrink)
        return None

    def report(self, z, termination, at_datum=None):
        m = self.manifold
        d, logs = m.dists_logs(z, self.sample.stacks)
        coincident = d <= _coincidence_threshold(d, self.cfg.coincidence_tol)
        res = m.norm(z, _smooth_part(m, self.sample, d, logs, coincident))
        return SolverReport(
            minimizer=z,
            objective_trace=self.objectives,
            residual_trace=self.residuals,
            termination=termination,
            method=self.method,
            residual=res,
            at_datum=at_datum,
            diagnostics={
                "objective": float(self.sample.weights @ d),
                "initial_distance": m.dist(self.init, z),
                "subgradient_bound": max(self.residuals) if self.residuals else 0.0,
            },
            events=self.events,
            iterates=self.iterates,
        )


def _state(manifold, sample, z, cfg):
    d, logs = manifold.dists_logs(z, sample.stacks)
    coincident = d <= _coincidence_threshold(d, cfg.coincidence_tol)
    return d, logs, coincident


def _ball_selection(manifold, sample, z, coincident, rng):
    """Random element of ``sum_{i coincident} w_i B`` (for ``selection='random'``)."""
    radius = float(sample.weights[coincident].sum()) * rng.random()
    return manifold.scale(manifold.random_tangent(z, rng), radius)


# -- solvers ---------------------------------------------------------------------


def subgradient_solve(manifold: ProductManifold, sample: WeightedSample, init, cfg: SolverConfig = None) -> SolverReport:
    """Riemannian subgradient descent ``z <- exp_z(-eta_k xi_k)``, ``eta_k = eta0 / sqrt(k+1)``.

    Stops on a small residual or step, on reaching an optimal datum, or after
    ``max_iters`` iterations, and returns the iterate with the lowest objective.
    When an iterate comes within one step length of a datum that passes
    :func:`datum_optimality`, the iterate is moved onto that datum.
    """
    cfg = cfg or SolverConfig(method="subgradient")
    run = _Run(manifold, sample, init, cfg, "subgradient")
    rng = np.random.default_rng(cfg.seed)
    w = sample.weights
    z = run.init
    eta0 = cfg.eta0
    best_F, best_z = math.inf, z
    last_step = 0.0
    snapped = set()
    termination = Termination.MAX_ITERS
    at_datum = None

    for k in range(cfg.max_iters):
        d, logs, coincident = _state(manifold, sample, z, cfg)
        F = float(w @ d)
        xi = _smooth_part(manifold, sample, d, logs, coincident)
        res = manifold.norm(z, xi)
        run.record(z, F, res)
        if F < best_F:
            best_F, best_z = F, z
        if eta0 is None:
            eta0 = F / max(1, len(sample)) if F > 0 else 1.0

        j = int(np.argmin(d))
        if coincident[j] or (d[j] <= last_step and j not in snapped):
            optimal = datum_optimality(manifold, sample, j, coincidence_tol=cfg.coincidence_tol)[0]
            if optimal and coincident[j]:
                best_z = z
                termination, at_datum = Termination.AT_DATUM, j
                break
            if optimal:
                snapped.add(j)
                run.events.append(f"iteration {k}: moved onto optimal datum {j}")
                z = sample.points[j]
                last_step = float(d[j])
                continue
        if res <= cfg.tol_residual and not np.any(coincident):
            termination = Termination.RESIDUAL_TOL
            break

        if cfg.selection == "random" and np.any(coincident):
            xi = manifold.add(xi, _ball_selection(manifold, sample, z, coincident, rng))
            res = manifold.norm(z, xi)
        eta = eta0 / math.sqrt(k + 1)
        last_step = eta * res
        if last_step <= cfg.tol_step:
            termination = Termination.STEP_TOL
            break
        new = run.step(z, manifold.scale(xi, -eta), 0.5)
        if new is None:
            run.events.append(f"iteration {k}: step retries exhausted")
            break
        z = new

    return run.report(best_z, termination, at_datum)


def _escape_step(manifold, sample, d, logs, coincident):
    """Descent step off a non-optimal datum.

    With ``R = sum_{i not at z} w_i log_i / d_i`` and ``T`` the Weiszfeld step over
    the other data, move by ``(1 - W / |R|) T`` where ``W`` is the weight sitting
    at the iterate.
    """
    w = sample.weights
    safe = np.where(coincident, 1.0, d)
    r = np.where(coincident, 0.0, w / safe)
    R = _combine(manifold, r, logs)
    return R, r.sum(), float(w[coincident].sum())


def weiszfeld_solve(manifold: ProductManifold, sample: WeightedSample, init, cfg: SolverConfig = None) -> SolverReport:
    """Product-aware Riemannian Weiszfeld iteration.

    ``z <- exp_z((1 - damping) sum_i w~_i log_z(x_i))`` with weights from
    :func:`weiszfeld_weights`. An iterate within ``coincidence_tol`` of a datum is
    moved onto it, as is one holding half the Weiszfeld weight when that datum
    passes :func:`datum_optimality`; if the datum is optimal the run stops with ``AtDatum``,
    otherwise an escape step restarts the iteration. Exits from the manifold
    halve the step (raise the damping) up to ``max_step_retries`` times.
    """
    cfg = cfg or SolverConfig(method="weiszfeld")
    run = _Run(manifold, sample, init, cfg, "weiszfeld")
    w = sample.weights
    z = run.init
    termination = Termination.MAX_ITERS
    at_datum = None
    snapped = set()

    for k in range(cfg.max_iters):
        d, logs, coincident = _state(manifold, sample, z, cfg)
        if np.any(coincident):
            j = int(np.argmin(d))
            if d[j] > 0:
                z = sample.points[j]
                d, logs, coincident = _state(manifold, sample, z, cfg)
        F = float(w @ d)
        xi = _smooth_part(manifold, sample, d, logs, coincident)
        res = manifold.norm(z, xi)
        run.record(z, F, res)

        if np.any(coincident):
            j = int(np.argmin(d))
            R, rsum, ball = _escape_step(manifold, sample, d, logs, coincident)
            if res <= ball + 1e-10:
                termination, at_datum = Termination.AT_DATUM, j
                break
            if cfg.weiszfeld_epsilon > 0:
                wt = _weiszfeld_weights(w, d, cfg.weiszfeld_epsilon)
                v = manifold.scale(_combine(manifold, wt, logs), 1.0 - cfg.damping)
            else:
                run.events.append(f"iteration {k}: escaping non-optimal datum {j}")
                v = manifold.scale(R, (1.0 - ball / res) / rsum)
        else:
            if res <= cfg.tol_residual:
                termination = Termination.RESIDUAL_TOL
                break
            wt = _weiszfeld_weights(w, d, cfg.weiszfeld_epsilon)
            v = manifold.scale(_combine(manifold, wt, logs), 1.0 - cfg.damping)
            # Weiszfeld only creeps onto a datum minimizer; test the datum once it dominates
            j = int(np.argmax(wt))
            if wt[j] >= 0.5 and j not in snapped:
                snapped.add(j)
                if datum_optimality(manifold, sample, j, coincidence_tol=cfg.coincidence_tol)[0]:
                    z = sample.points[j]
                    continue

        if manifold.norm(z, v) <= cfg.tol_step:
            termination = Termination.STEP_TOL
            break
        new = run.step(z, v, 0.5)
        if new is None:
            run.events.append(f"iteration {k}: step retries exhausted")
            break
        z = new

    return run.report(z, termination, at_datum)


def hybrid_solve(manifold: ProductManifold, sample: WeightedSample, init, cfg: SolverConfig = None) -> SolverReport:
    """Subgradient iterations until the residual drops below
    ``hybrid_switch_residual`` (or ``hybrid_max_subgradient_iters`` pass), then
    Weiszfeld from the best subgradient iterate. Traces are concatenated and
    ``switch_index`` marks the first Weiszfeld entry.
    """
    cfg = cfg or SolverConfig(method="hybrid")
    budget = min(cfg.hybrid_max_subgradient_iters, cfg.max_iters)
    first = subgradient_solve(
        manifold, sample, init, replace(cfg, max_iters=budget, tol_residual=cfg.hybrid_switch_residual)
    )
    remaining = cfg.max_iters - first.iterations_used
    if first.termination == Termination.AT_DATUM or remaining < 1:
        first.method = "hybrid"
        first.switch_index = None
        return first
    second = weiszfeld_solve(manifold, sample, first.minimizer, replace(cfg, max_iters=remaining))
    out = SolverReport(
        minimizer=second.minimizer,
        objective_trace=first.objective_trace + second.objective_trace,
        residual_trace=first.residual_trace + second.residual_trace,
        termination=second.termination,
        method="hybrid",
        residual=second.residual,
        at_datum=second.at_datum,
        switch_index=first.iterations_used,
        diagnostics=dict(second.diagnostics),
        events=first.events + ["switch to weiszfeld"] + second.events,
        iterates=None if first.iterates is None else first.iterates + second.iterates,
    )
    out.diagnostics["initial_distance"] = manifold.dist(manifold.check_point(init), out.minimizer)
    out.diagnostics["subgradient_bound"] = max(out.residual_trace)
    return out


_SOLVERS = {"subgradient": subgradient_solve, "weiszfeld": weiszfeld_solve, "hybrid": hybrid_solve}


def geometric_median(manifold: ProductManifold, sample: WeightedSample, init=None, cfg: SolverConfig = None) -> SolverReport:
    """Solve for the geometric median with ``cfg.method``; ``init`` defaults to the product Frechet mean."""
    cfg = cfg or SolverConfig()
    if init is None:
        from .frechet import product_mean

        init = product_mean(manifold, sample)
    return _SOLVERS[cfg.method](manifold, sample, init, cfg)
