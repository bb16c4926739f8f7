"""Source, scratch and L2-SP transfer estimators and their target risk."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from l2sp.linalg import LinalgInputError, pseudo_inverse, ridge_solve, sigma_norm_sq


class Kind(str, enum.Enum):
    SOURCE = "Source"
    SCRATCH = "ScratchTarget"
    TRANSFER = "TransferTarget"


@dataclass(frozen=True, eq=False)
class FittedModel:
    beta: np.ndarray
    kind: Kind
    lam: float
    prior_ref: str | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.beta)):
            raise ValueError("fitted coefficients are not finite")
        if self.kind is Kind.TRANSFER and self.prior_ref is None:
            raise ValueError("a transfer fit must record its prior")


def fit_source(X0, y0, lambda0):
    """Ridge fit on the source task; ``lambda0 = 0`` is the min-norm interpolator."""
    return FittedModel(ridge_solve(X0, y0, lambda0), Kind.SOURCE, float(lambda0))


def fit_scratch(X1, y1, lambda1):
    """Ridge fit on the target task alone, shrinking toward zero."""
    return FittedModel(ridge_solve(X1, y1, lambda1), Kind.SCRATCH, float(lambda1))


def fit_transfer(X1, y1, lambda1, beta0, prior_ref="beta0"):
    """L2-SP fit: minimise ``|y1 - X1 b|^2 + lambda1 |b - beta0|^2``.

    The problem is solved as ridge on the residual ``y1 - X1 beta0`` and
    shifted back, which is algebraically identical to
    ``(X1^T X1 + lambda1 I)^{-1} (X1^T y1 + lambda1 beta0)`` and, at
    ``lambda1 = 0``, gives the limit ``beta0 + X1^+ (y1 - X1 beta0)``.
    Column blocks ``y1`` of shape ``(n1, k)`` with ``beta0`` of shape
    ``(p, k)`` fit ``k`` problems at once.
    """
    X1 = np.asarray(X1, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    if X1.ndim != 2 or beta0.shape[:1] != (X1.shape[1],):
        raise LinalgInputError(f"beta0 has shape {beta0.shape}, expected ({X1.shape[-1]}, ...)")
    resid = np.asarray(y1, dtype=float) - X1 @ beta0
    if float(lambda1) == 0.0:
        beta = beta0 + pseudo_inverse(X1) @ resid
    else:
        beta = beta0 + ridge_solve(X1, resid, lambda1)
    return FittedModel(beta, Kind.TRANSFER, float(lambda1), prior_ref=prior_ref)


def target_risk(beta, tp):
    """Excess prediction risk ``|beta - w1|^2_{Sigma1}`` on the target task.

    A ``(p, k)`` coefficient block gives the ``k`` risks as an array.
    """
    if isinstance(beta, FittedModel):
        beta = beta.beta
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 2:
        E = beta - tp.w1[:, None]
        return np.einsum("ik,ik->k", E, tp.Sigma1 @ E)
    return sigma_norm_sq(beta - tp.w1, tp.Sigma1)
