"""Acceptance gate: one test per criterion, each with its tolerance and time limit.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary ends with
one PASS/FAIL line per criterion.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from product_median import (
    Euclidean,
    PositiveHalfLine,
    ProductManifold,
    SolverConfig,
    Sphere,
    SpdBuresWasserstein,
    Termination,
    WeightedSample,
    datum_optimality,
    min_norm_subgradient,
    objective,
    product_mean,
    subgradient_solve,
    weiszfeld_solve,
)
from product_median import lab

from conftest import PRODUCTS, random_factor_point, random_point, random_sample
from oracles import grid_median

pytestmark = pytest.mark.acceptance

GEOMETRY_SPACES = {
    "R3": ProductManifold([Euclidean(3)]),
    "R+": ProductManifold([PositiveHalfLine()]),
    "S3": ProductManifold([Sphere(3)]),
    "BW3": ProductManifold([SpdBuresWasserstein(3)]),
    "R2xR": PRODUCTS["R2xR"](),
    "RxS3": PRODUCTS["RxS3"](),
    "R3xBW3": PRODUCTS["R3xBW3"](),
}


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.1f} s, limit {self.limit} s"


def coord_gap(a, b):
    return max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(a, b))


def first_order_residual(pm, sample, rep):
    """Norm of the minimum-norm element of the subdifferential at the output."""
    if rep.at_datum is None:
        return rep.residual
    _, g, ball = datum_optimality(pm, sample, rep.at_datum)
    return max(0.0, g - ball)


def tangent_basis(pm, z):
    """Spanning set of the tangent space at ``z``."""
    basis = []
    for j, (f, p) in enumerate(zip(pm.factors, z)):
        if isinstance(f, Euclidean):
            vecs = list(np.eye(f.n))
        elif isinstance(f, PositiveHalfLine):
            vecs = [1.0]
        elif isinstance(f, Sphere):
            P = np.eye(f.n) - np.outer(p, p)
            q, _ = np.linalg.qr(P)
            vecs = list(q.T[: f.n - 1])
            vecs = [v - (v @ p) * p for v in vecs]
        else:
            vecs = []
            for a in range(f.n):
                for b in range(a, f.n):
                    E = np.zeros((f.n, f.n))
                    E[a, b] = E[b, a] = 1.0
                    vecs.append(E)
        for v in vecs:
            t = list(pm.zero_tangent(z))
            t[j] = v
            basis.append(tuple(t))
    return basis


# -- 1 ------------------------------------------------------------------------------


def test_criterion_1_geometry(record_property):
    record_property("criterion", "1. geometry suite (round trip, norm-distance, midpoints)")
    rng = np.random.default_rng(1)
    with Timer(10):
        for name, pm in GEOMETRY_SPACES.items():
            for _ in range(200):
                p, x = random_point(pm, rng, spread=1.5), random_point(pm, rng, spread=1.5)
                v = pm.log(p, x)
                assert coord_gap(pm.exp(p, v), x) <= 1e-8, name
                assert abs(pm.norm(p, v) - pm.dist(p, x)) <= 1e-8, name
                m = pm.exp(p, pm.scale(v, 0.5))
                assert abs(pm.dist(p, m) - pm.dist(m, x)) <= 1e-8, name


# -- 2 ------------------------------------------------------------------------------


def test_criterion_2_subgradient_finite_differences(record_property):
    record_property("criterion", "2. min-norm subgradient vs central differences")
    h = 1e-6
    worst = 0.0
    with Timer(30):
        for k, name in enumerate(PRODUCTS):
            pm = PRODUCTS[name]()
            rng = np.random.default_rng(100 + k)
            sample = random_sample(pm, rng, 10)
            for _ in range(100):
                z = random_point(pm, rng)
                assert float(np.min(pm.dists(z, sample.stacks))) > 1e-3
                xi = min_norm_subgradient(pm, sample, z)
                basis = tangent_basis(pm, z)
                G = np.array([[pm.inner(z, a, b) for b in basis] for a in basis])
                fd = np.array([
                    (objective(pm, sample, pm.exp(z, pm.scale(b, h)))
                     - objective(pm, sample, pm.exp(z, pm.scale(b, -h)))) / (2 * h)
                    for b in basis
                ])
                coef = np.linalg.solve(G, fd)
                g_fd = pm.zero_tangent(z)
                for c, b in zip(coef, basis):
                    g_fd = pm.add(g_fd, pm.scale(b, c))
                rel = pm.norm(z, pm.add(g_fd, pm.scale(xi, -1.0))) / pm.norm(z, xi)
                worst = max(worst, rel)
    assert worst <= 1e-5, f"worst relative error {worst:.3g}"


# -- 3 ------------------------------------------------------------------------------


def test_criterion_3_grid_oracle(record_property):
    record_property("criterion", "3. solvers vs brute-force grid oracle (2-D, n=7)")
    pm = ProductManifold([Euclidean(1), Euclidean(1)])
    failures = []
    with Timer(60):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.standard_normal((7, 2))
            w = rng.uniform(0.5, 1.5, 7)
            w /= w.sum()
            sample = WeightedSample(pm, [(x[:1], x[1:]) for x in X], w)
            z_star, f_star = grid_median(X, w)
            for method, solve in (("subgradient", subgradient_solve), ("weiszfeld", weiszfeld_solve)):
                rep = solve(pm, sample, product_mean(pm, sample), SolverConfig(method=method))
                pos = float(np.linalg.norm(np.concatenate(rep.minimizer) - z_star))
                gap = abs(rep.objective - f_star)
                if pos > 1e-4 or gap > 1e-6:
                    failures.append((seed, method, pos, gap))
    assert not failures, failures


# -- 4 ------------------------------------------------------------------------------


def test_criterion_4_cross_solver(record_property):
    record_property("criterion", "4. cross-solver agreement on every product type")
    failures = []
    with Timer(300):
        for k, name in enumerate(PRODUCTS):
            pm = PRODUCTS[name]()
            for seed in range(20):
                rng = np.random.default_rng(1000 * k + seed)
                sample = random_sample(pm, rng, 10)
                init = product_mean(pm, sample)
                w = weiszfeld_solve(pm, sample, init)
                g = subgradient_solve(pm, sample, init)
                dF = abs(w.objective - g.best_objective)
                res = first_order_residual(pm, sample, w)
                if dF > 1e-5 or res > 1e-8:
                    failures.append((name, seed, dF, res))
    assert not failures, failures


# -- 5 ------------------------------------------------------------------------------


def _separated_instance(pm, seed, n, delta=0.1):
    """Seeded sample whose median is at least ``delta`` from every datum."""
    while True:
        rng = np.random.default_rng(seed)
        sample = random_sample(pm, rng, n)
        ref = weiszfeld_solve(pm, sample, product_mean(pm, sample), SolverConfig(tol_residual=1e-14))
        if float(np.min(pm.dists(ref.minimizer, sample.stacks))) >= delta:
            return sample, ref
        seed += 10_000


def test_criterion_5_rates(record_property):
    record_property("criterion", "5. sublinear subgradient trend and linear Weiszfeld rate")
    problems = []
    with Timer(120):
        pm = PRODUCTS["R2xR"]()
        for seed in range(5):
            sample, ref = _separated_instance(pm, seed, 50)
            cfg = SolverConfig(method="subgradient", max_iters=4000, tol_residual=1e-300, tol_step=1e-300)
            rep = subgradient_solve(pm, sample, product_mean(pm, sample), cfg)
            assert rep.iterations_used == 4000
            best = np.minimum.accumulate(rep.objective_trace) - ref.objective
            for K in (250, 1000):
                if not best[4 * K - 1] < best[K - 1]:
                    problems.append(("subgradient", seed, K, best[K - 1], best[4 * K - 1]))

        for name in ("R2xR", "R3xBW3", "RxR+"):
            pm = PRODUCTS[name]()
            for seed in range(5):
                sample, _ = _separated_instance(pm, seed, 30)
                cfg = SolverConfig(tol_residual=1e-12, record_iterates=True)
                rep = weiszfeld_solve(pm, sample, product_mean(pm, sample), cfg)
                z_star = rep.iterates[-1]
                d = [pm.dist(z, z_star) for z in rep.iterates]
                tail = range(max(0, len(d) - 21), len(d) - 1)
                ratios = [d[k + 1] / d[k] for k in tail if d[k] > 0]
                if max(ratios) > 0.95:
                    problems.append(("weiszfeld", name, seed, max(ratios)))
    assert not problems, problems


# -- 6 ------------------------------------------------------------------------------


def test_criterion_6_univariate_sweep(record_property):
    record_property("criterion", "6. univariate contamination sweep (n=1000, 5 trials)")
    spec = lab.ContaminationSpec(n=1000, trials=5, seed=0)
    with Timer(300):
        res = lab.run_sweep(spec)
    mean, med = res.mean_error("frechet_mean"), res.mean_error("geometric_median")
    table = {a: (round(mean[a], 4), round(med[a], 4)) for a in spec.alpha_grid}
    clauses = {
        "median <= mean for alpha >= 0.1": all(med[a] <= mean[a] for a in spec.alpha_grid if a >= 0.1),
        "mean(0.45) >= 5 mean(0)": mean[0.45] >= 5 * mean[0.0],
        "median(0.45) <= 3 median(0)": med[0.45] <= 3 * med[0.0],
    }
    failed = [c for c, ok in clauses.items() if not ok]
    assert not failed, f"failed clauses {failed}; (mean, median) by alpha: {table}"


# -- 7 ------------------------------------------------------------------------------


def test_criterion_7_multivariate_sweep(record_property):
    record_property("criterion", "7. multivariate contamination sweep (d in {5,10}, 3 rho values)")
    bad = []
    with Timer(900):
        for d in (5, 10):
            for rho in (0.1, 0.5, 0.9):
                spec = lab.ContaminationSpec(n=200, trials=3, seed=0, scenario="multivariate", d=d, rho=rho)
                res = lab.run_sweep(spec)
                mean, med = res.mean_error("frechet_mean"), res.mean_error("geometric_median")
                bad += [(d, rho, a, med[a], mean[a]) for a in spec.alpha_grid if a >= 0.1 and med[a] > mean[a]]
    assert not bad, bad


# -- 8 ------------------------------------------------------------------------------


def test_criterion_8_breakdown(record_property):
    record_property("criterion", "8. breakdown dichotomy at contaminant weight 0.4 / 0.6")
    clean = WeightedSample(lab.UNIVARIATE, lab.sample_univariate("signal", lab.make_rng(8), 50))
    radii = [0.0, 1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6]
    with Timer(120):
        low = lab.breakdown_probe(lab.UNIVARIATE, clean, 0.4, radii)
        high = lab.breakdown_probe(lab.UNIVARIATE, clean, 0.6, radii)
    bound = low.diameter / (1 - 2 * 0.4)
    assert all(dist <= bound + 1e-6 for _, dist in low.rows), (bound, low.rows)
    far = {R: dist for R, dist in high.rows}
    for R in (1e3, 1e6):
        assert far[R] > R - 2 * high.diameter, (R, far[R], high.diameter)


# -- 9 ------------------------------------------------------------------------------


def test_criterion_9_perturbation(record_property):
    record_property("criterion", "9. perturbation stability (log-log slope, small-epsilon displacement)")
    pm = ProductManifold([Euclidean(2), Euclidean(1)])
    rng = np.random.default_rng(9)
    sample = WeightedSample(pm, [(rng.standard_normal(2), rng.standard_normal(1)) for _ in range(30)])
    eps = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
    with Timer(120):
        res = lab.perturbation_probe(pm, sample, eps, lab.make_rng(9), trials=20)
    assert 0.45 <= res.slope <= 1.1, res
    assert res.rows[0][1] < 1e-2, res.rows


# -- 10 -----------------------------------------------------------------------------

COMMANDS = {
    "sweep-univariate": ["--n", "300", "--trials", "2"],
    "sweep-multivariate": ["--n", "40", "--d", "3", "--trials", "1", "--alphas", "0,0.2,0.4"],
    "breakdown": ["--n", "40", "--wi", "0.6"],
    "perturbation": ["--n", "20", "--trials", "3"],
}


def test_criterion_10_determinism(record_property, tmp_path):
    record_property("criterion", "10. byte-identical CSV across reruns and thread counts")
    differing = []
    for command, args in COMMANDS.items():
        blobs = []
        for i, threads in enumerate(("1", "1", "4")):
            out = tmp_path / f"{command}-{i}"
            env = dict(os.environ, PRODUCT_MEDIAN_THREADS=threads)
            subprocess.run(
                [sys.executable, "-m", "product_median", command, *args, "--seed", "7", "--out", str(out)],
                check=True, env=env,
            )
            blobs.append((out / "results.csv").read_bytes())
        if not blobs[0] == blobs[1] == blobs[2]:
            differing.append(command)
    assert not differing, differing
