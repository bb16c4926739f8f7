"""Dense linear-algebra kernel.

Matrices are plain ``numpy.ndarray`` objects in row-major (C) order; a design
``X`` has shape ``(n, p)`` with one sample per row. Every function is pure and
validates its inputs: non-finite entries and mismatched shapes raise
:class:`LinalgInputError`.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

SYMMETRY_RTOL = 1e-12
NEG_EIG_RTOL = 1e-10


class LinalgInputError(ValueError):
    """Raised for non-finite, mis-shaped or otherwise invalid inputs."""


def _as_matrix(A, name="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or 0 in A.shape:
        raise LinalgInputError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise LinalgInputError(f"{name} has non-finite entries")
    return A


def _as_vector(v, name="vector"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise LinalgInputError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise LinalgInputError(f"{name} has non-finite entries")
    return v


def _as_rhs(y, name="y"):
    y = np.asarray(y, dtype=float)
    if y.ndim not in (1, 2):
        raise LinalgInputError(f"{name} must be 1-D or 2-D, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise LinalgInputError(f"{name} has non-finite entries")
    return y


def _as_symmetric(S, name="S"):
    S = _as_matrix(S, name)
    if S.shape[0] != S.shape[1]:
        raise LinalgInputError(f"{name} must be square, got shape {S.shape}")
    scale = max(np.max(np.abs(S)), np.finfo(float).tiny)
    if np.max(np.abs(S - S.T)) > SYMMETRY_RTOL * scale:
        raise LinalgInputError(f"{name} is not symmetric")
    return S


def pinv_rtol(shape, smax):
    """Absolute singular-value cutoff ``max(n, p) * eps * smax``."""
    return max(shape) * np.finfo(float).eps * smax


def thin_svd(X):
    """Rank-truncated thin SVD ``X = U diag(s) V^T``.

    Returns ``(U, s, V)`` with ``V`` of shape ``(p, r)`` where ``r`` is the
    numerical rank; singular values at or below :func:`pinv_rtol` are dropped.
    """
    X = _as_matrix(X, "X")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    smax = s[0] if s.size else 0.0
    keep = s > pinv_rtol(X.shape, smax)
    return U[:, keep], s[keep], Vt[keep].T


def pseudo_inverse(X):
    """Moore-Penrose pseudo-inverse via the rank-truncated SVD."""
    U, s, V = thin_svd(X)
    return (V / s) @ U.T


def row_projector(X):
    """Orthogonal projector ``X^+ X`` onto the row space of ``X``."""
    _, _, V = thin_svd(X)
    return V @ V.T


def ridge_solve(X, y, lam):
    """Solve ``(X^T X + lam I) beta = X^T y``.

    ``lam = 0`` returns the minimum-norm least-squares solution ``X^+ y``,
    the ``lam -> 0`` limit. For ``lam > 0`` the smaller of the primal
    ``p x p`` and dual ``n x n`` systems is Cholesky-factored. ``y`` may be an
    ``(n, k)`` block of right-hand sides.
    """
    X = _as_matrix(X, "X")
    y = _as_rhs(y, "y")
    n, p = X.shape
    if y.shape[0] != n:
        raise LinalgInputError(f"y has length {y.shape[0]}, expected {n}")
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise LinalgInputError(f"lambda must be finite and >= 0, got {lam}")
    if lam == 0.0:
        return pseudo_inverse(X) @ y
    if p > n:
        G = X @ X.T
        G[np.diag_indices_from(G)] += lam
        return X.T @ sla.cho_solve(sla.cho_factor(G, lower=True), y)
    G = X.T @ X
    G[np.diag_indices_from(G)] += lam
    return sla.cho_solve(sla.cho_factor(G, lower=True), X.T @ y)


def sym_eig(S):
    """Eigen-decomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(w, V)`` with ``S = V diag(w) V^T``.
    """
    S = _as_symmetric(S)
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return w[::-1].copy(), V[:, ::-1].copy()


def spd_sqrt(S):
    """Symmetric PSD square root. Tiny negative eigenvalues are clipped."""
    w, V = sym_eig(S)
    wmax = max(np.max(np.abs(w)), np.finfo(float).tiny)
    if np.min(w) < -NEG_EIG_RTOL * wmax:
        raise LinalgInputError(f"matrix has negative eigenvalue {np.min(w):.3e}")
    r = np.sqrt(np.clip(w, 0.0, None))
    R = (V * r) @ V.T
    return 0.5 * (R + R.T)


def sigma_norm_sq(v, S):
    """Quadratic form ``v^T S v``."""
    v = _as_vector(v, "v")
    S = _as_matrix(S, "S")
    if S.shape != (v.shape[0], v.shape[0]):
        raise LinalgInputError(f"S has shape {S.shape}, expected {(v.shape[0],) * 2}")
    return float(v @ S @ v)


def sigma_frob_sq(A, S):
    """``Tr(A^T S A)`` without forming the product ``A^T S A``."""
    A = _as_matrix(A, "A")
    S = _as_matrix(S, "S")
    if S.shape != (A.shape[0], A.shape[0]):
        raise LinalgInputError(f"S has shape {S.shape}, incompatible with A {A.shape}")
    return float(np.sum(A * (S @ A)))
