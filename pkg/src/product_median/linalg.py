"""Dense symmetric linear algebra for the Bures-Wasserstein factor.

Everything here is a pure function of its inputs. The eigensolver is LAPACK's
``syevd`` through :func:`numpy.linalg.eigh`, which is deterministic for a fixed
input and build.
"""

import numpy as np

from .errors import InvalidInput, NotSpd, ShapeError

#: smallest admissible eigenvalue, relative to the largest one
SPD_TOLERANCE = 1e-12
#: relative Frobenius residual expected from the routines below
EIG_TOLERANCE = 1e-10
# asymmetry tolerated (and removed) on input, relative to the Frobenius norm
_SYMMETRY_SLACK = 1e-8


def symmetrize(S):
    """Return ``(S + S^T) / 2`` over the last two axes."""
    return 0.5 * (S + np.swapaxes(S, -1, -2))


def as_symmetric(S):
    """Validate a (stack of) square, finite, numerically symmetric matrices.

    Returns a float copy that is exactly symmetric.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim < 2 or S.shape[-1] != S.shape[-2]:
        raise ShapeError(f"expected square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InvalidInput("matrix has non-finite entries")
    skew = np.linalg.norm(S - np.swapaxes(S, -1, -2), axis=(-2, -1))
    scale = np.maximum(1.0, np.linalg.norm(S, axis=(-2, -1)))
    if np.any(skew > _SYMMETRY_SLACK * scale):
        raise InvalidInput("matrix is not symmetric")
    return symmetrize(S)


def sym_eig(S):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    S : array_like, shape (..., d, d)
        Symmetric matrix or stack of them.

    Returns
    -------
    eigenvalues : ndarray, shape (..., d)
        In ascending order.
    eigenvectors : ndarray, shape (..., d, d)
        Orthogonal; column ``k`` pairs with ``eigenvalues[..., k]``.
    """
    return np.linalg.eigh(as_symmetric(S))


def _recompose(Q, values):
    out = (Q * values[..., None, :]) @ np.swapaxes(Q, -1, -2)
    return symmetrize(out)


def _check_spectrum(w):
    top = w[..., -1]
    bad = (top <= 0) | (w[..., 0] <= SPD_TOLERANCE * np.abs(top))
    if np.any(bad):
        raise NotSpd(
            f"matrix is not positive definite (smallest eigenvalue {np.min(w[..., 0]):.3g})"
        )


def check_spd(S):
    """Raise :class:`NotSpd` unless every matrix in ``S`` is SPD; return it symmetrized."""
    S = as_symmetric(S)
    _check_spectrum(np.linalg.eigvalsh(S))
    return S


def is_spd(S):
    try:
        check_spd(S)
    except (NotSpd, InvalidInput, ShapeError):
        return False
    return True


def sqrt_spd(S):
    """Principal square root of an SPD matrix (or stack)."""
    w, Q = sym_eig(S)
    _check_spectrum(w)
    return _recompose(Q, np.sqrt(w))


def inv_sqrt_spd(S):
    """Inverse principal square root of an SPD matrix (or stack)."""
    w, Q = sym_eig(S)
    _check_spectrum(w)
    return _recompose(Q, 1.0 / np.sqrt(w))


def sqrt_and_inv_sqrt(S):
    """``(S^{1/2}, S^{-1/2})`` from a single eigendecomposition."""
    w, Q = sym_eig(S)
    _check_spectrum(w)
    r = np.sqrt(w)
    return _recompose(Q, r), _recompose(Q, 1.0 / r)


def sqrt_psd(A):
    """Square root of a positive semidefinite matrix, clipping round-off negatives to 0.

    Used on products like ``S^{1/2} X S^{1/2}`` that are PSD by construction.
    """
    w, Q = np.linalg.eigh(symmetrize(np.asarray(A, dtype=float)))
    return _recompose(Q, np.sqrt(np.clip(w, 0.0, None)))


def trace_sqrt_psd(A):
    """``tr(A^{1/2})`` for a PSD matrix or stack, without forming the root."""
    w = np.linalg.eigvalsh(symmetrize(np.asarray(A, dtype=float)))
    return np.sum(np.sqrt(np.clip(w, 0.0, None)), axis=-1)


def solve_lyapunov(S, V):
    """Solve ``L S + S L = V`` for symmetric ``L``.

    The solve happens in the eigenbasis of ``S``, where the equation is diagonal:
    ``L'_{ij} = V'_{ij} / (lambda_i + lambda_j)``.

    Parameters
    ----------
    S : array_like, shape (d, d)
        SPD coefficient matrix.
    V : array_like, shape (..., d, d)
        Symmetric right-hand side(s).

    Returns
    -------
    ndarray, shape (..., d, d)
    """
    w, Q = sym_eig(S)
    _check_spectrum(w)
    V = as_symmetric(V)
    if V.shape[-2:] != Q.shape:
        raise ShapeError(f"dimension mismatch: S is {Q.shape}, V is {V.shape[-2:]}")
    Vp = np.swapaxes(Q, -1, -2) @ V @ Q
    Lp = Vp / (w[:, None] + w[None, :])
    return symmetrize(Q @ Lp @ Q.T)
