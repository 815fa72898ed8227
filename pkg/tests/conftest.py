import math

import numpy as np
import pytest

from product_median import Euclidean, PositiveHalfLine, ProductManifold, Sphere, SpdBuresWasserstein, WeightedSample

from oracles import random_spd

# product types exercised throughout the suite
PRODUCTS = {
    "R2xR": lambda: ProductManifold([Euclidean(2), Euclidean(1)]),
    "RxS3": lambda: ProductManifold([Euclidean(1), Sphere(3)]),
    "R3xBW3": lambda: ProductManifold([Euclidean(3), SpdBuresWasserstein(3)]),
    "RxR+": lambda: ProductManifold([Euclidean(1), PositiveHalfLine()]),
}


def random_factor_point(f, rng, spread=1.0, near=None):
    """Random point on a factor; sphere and half-line points stay in a convex patch."""
    if isinstance(f, Euclidean):
        return spread * rng.standard_normal(f.n)
    if isinstance(f, PositiveHalfLine):
        return float(1.0 + 0.5 * spread * rng.random())
    if isinstance(f, Sphere):
        pole = np.zeros(f.n)
        pole[-1] = 1.0
        v = 0.4 * spread * rng.standard_normal(f.n)
        v[-1] = 0.0
        return f.exp(pole, v)
    if isinstance(f, SpdBuresWasserstein):
        return random_spd(rng, f.n, cond=1.0 + 3.0 * spread)
    raise TypeError(f)


def random_point(manifold, rng, spread=1.0):
    return tuple(random_factor_point(f, rng, spread) for f in manifold.factors)


def random_sample(manifold, rng, n, spread=1.0, weighted=True):
    pts = [random_point(manifold, rng, spread) for _ in range(n)]
    w = rng.uniform(0.5, 1.5, n) if weighted else np.ones(n)
    return WeightedSample(manifold, pts, w / w.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


# -- acceptance summary ---------------------------------------------------------

_acceptance = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        for key, value in report.user_properties:
            if key == "criterion":
                _acceptance[value] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda s: int(s.split(".")[0])):
        verdict = "PASS" if _acceptance[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
