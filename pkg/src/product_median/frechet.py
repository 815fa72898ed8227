"""Weighted Frechet means per factor and on products.

The squared product distance is a sum over factors, so the product mean is just
the tuple of factor means. On SPD matrices with the Bures-Wasserstein metric the
factor mean is the Wasserstein barycenter of centred Gaussians.
"""

import numpy as np

from . import linalg
from .errors import NonConvergence
from .manifolds import Euclidean, Factor, PositiveHalfLine, Sphere, SpdBuresWasserstein
from .product import ProductManifold, WeightedSample, at_factor

SPHERE_TOL = 1e-10
SPHERE_MAX_ITERS = 1000
BARYCENTER_TOL = 1e-10
BARYCENTER_MAX_ITERS = 1000


def _sphere_mean(factor, X, w):
    m = w @ X
    r = np.linalg.norm(m)
    m = m / r if r > 1e-12 else X[0].copy()
    for it in range(SPHERE_MAX_ITERS):
        step = w @ factor.logs(m, X)
        if np.linalg.norm(step) <= SPHERE_TOL:
            return m
        m = factor.exp(m, step)
    raise NonConvergence("sphere mean did not converge", last=m, iterations=SPHERE_MAX_ITERS)


def bw_barycenter(X, w, tol=BARYCENTER_TOL, max_iters=BARYCENTER_MAX_ITERS):
    """Bures-Wasserstein barycenter of the SPD stack ``X`` with weights ``w``.

    Fixed-point iteration ``S <- S^{-1/2} (sum_i w_i (S^{1/2} X_i S^{1/2})^{1/2})^2 S^{-1/2}``
    started from the arithmetic mean, stopped when the Frobenius change is at most
    ``tol``.
    """
    S = linalg.symmetrize(np.tensordot(w, X, axes=1))
    for it in range(max_iters):
        r, ir = linalg.sqrt_and_inv_sqrt(S)
        M = np.tensordot(w, linalg.sqrt_psd(r @ X @ r), axes=1)
        new = linalg.symmetrize(ir @ M @ M @ ir)
        change = np.linalg.norm(new - S)
        S = new
        if change <= tol:
            return S
    raise NonConvergence("Bures-Wasserstein barycenter did not converge", last=S, iterations=max_iters)


def factor_mean(factor: Factor, points, weights):
    """Weighted Frechet mean of points on a single factor.

    Parameters
    ----------
    factor : Factor
    points : sequence or stacked array
        Points on ``factor``; a stacked array (as produced by ``factor.stack``)
        is used as is.
    weights : array_like
        Positive weights summing to one.

    Raises
    ------
    NonConvergence
        If an iterative mean hits its cap; the last iterate is on ``.last``.
    """
    w = np.asarray(weights, dtype=float)
    X = points if isinstance(points, np.ndarray) else factor.stack(points)
    if isinstance(factor, PositiveHalfLine):
        return float(w @ X)
    if isinstance(factor, Euclidean):
        return w @ X
    if isinstance(factor, Sphere):
        return _sphere_mean(factor, X, w)
    if isinstance(factor, SpdBuresWasserstein):
        return bw_barycenter(X, w)
    raise TypeError(f"no mean implemented for {factor!r}")


def product_mean(manifold: ProductManifold, sample: WeightedSample):
    """Frechet mean on the product: the tuple of factor means."""
    out = []
    for j, (f, X) in enumerate(zip(manifold.factors, sample.stacks)):
        with at_factor(j):
            out.append(factor_mean(f, X, sample.weights))
    return tuple(out)


def frechet_objective(manifold: ProductManifold, sample: WeightedSample, z) -> float:
    """``sum_i w_i d(z, x_i)^2``."""
    d = manifold.dists(z, sample.stacks)
    return float(sample.weights @ (d * d))
