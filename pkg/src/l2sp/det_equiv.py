"""Deterministic equivalents for the asymptotic transfer criterion.

With ``tau_i = lambda_i / n_i`` and ``gamma_i = p / n_i`` the resolvent
``Q(tau) = (tau I + delta Sigma)^{-1}`` is defined through the fixed point

    delta = gamma * mean_j( s_j / (tau + delta * s_j) )

over the eigenvalues ``s_j`` of ``Sigma``. For ``Sigma = I`` this reduces to
``delta^2 + tau delta - gamma = 0``, so ``delta = gamma * a`` and
``Q = a I`` with ``a`` the positive root of ``gamma a^2 + tau a - 1 = 0``
(:func:`isotropic_a`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from l2sp.finite_risk import BoundaryVerdict, Criterion
from l2sp.linalg import sym_eig

RESIDUAL_RTOL = 1e-12
ITER_RTOL = 1e-14  # iterate past the acceptance level so reported residuals sit well below it
DAMPING = 0.5
MAX_ITER = 100_000
COMMUTE_ATOL = 1e-10


class ConvergenceError(RuntimeError):
    """Raised when the fixed-point solver fails to converge."""


@dataclass(frozen=True, eq=False)
class DECtx:
    gamma: float
    spectrum: np.ndarray
    eigvecs: np.ndarray | None
    tau: float
    delta: float
    converged: bool
    iterations: int
    residual: float

    @property
    def p(self):
        return self.spectrum.shape[0]

    @property
    def q_eigenvalues(self):
        return 1.0 / (self.tau + self.delta * self.spectrum)


def _fixed_point_map(delta, s, gamma, tau):
    denom = tau + delta * s
    terms = np.divide(s, denom, out=np.zeros_like(s), where=s > 0)
    return gamma * np.mean(terms)


def _check_args(s, gamma, tau):
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or s.size == 0 or not np.all(np.isfinite(s)):
        raise ValueError("spectrum must be a non-empty finite 1-D array")
    if np.any(s < 0):
        raise ValueError("spectrum must be non-negative")
    if not np.any(s > 0):
        raise ValueError("spectrum is identically zero")
    gamma, tau = float(gamma), float(tau)
    if not (np.isfinite(gamma) and gamma > 0):
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if not (np.isfinite(tau) and tau >= 0):
        raise ValueError(f"tau must be >= 0, got {tau}")
    if tau == 0 and gamma <= 1 and np.min(s) == 0:
        raise ValueError("tau = 0 needs gamma > 1 or a strictly positive spectrum")
    return s, gamma, tau


def _solve(s, gamma, tau):
    """Return ``(delta, iterations, residual, converged)``."""
    delta = float(np.sqrt(gamma) * np.mean(s))
    for it in range(1, MAX_ITER + 1):
        f = _fixed_point_map(delta, s, gamma, tau)
        resid = abs(delta - f)
        if resid < ITER_RTOL * max(delta, 1.0):
            return delta, it - 1, resid, True
        delta = (1 - DAMPING) * delta + DAMPING * f
        if not (np.isfinite(delta) and delta > 0):
            break

    # g is strictly increasing in delta, so bisection on a bracket is safe
    smax = np.max(s)
    lo = 1e-12
    hi = (gamma * smax / tau if tau > 0 else 0.0) + np.sqrt(gamma) * smax
    g = lambda d: d - _fixed_point_map(d, s, gamma, tau)
    while g(hi) < 0:
        hi *= 2.0
    if g(lo) > 0:
        raise ConvergenceError("fixed point below the bisection bracket")
    delta = brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    resid = abs(g(delta))
    ok = resid < RESIDUAL_RTOL * max(delta, 1.0)
    if not ok:
        raise ConvergenceError(f"fixed point residual {resid:.3e} after bisection")
    return delta, MAX_ITER, resid, ok


def solve_delta(spectrum, gamma, tau):
    """Unique positive solution ``delta`` of the normalized fixed point."""
    s, gamma, tau = _check_args(spectrum, gamma, tau)
    return float(_solve(s, gamma, tau)[0])


def de_context(Sigma, gamma, tau):
    """Solve the fixed point for covariance ``Sigma`` and keep its eigenbasis."""
    w, V = sym_eig(Sigma)
    w = np.clip(w, 0.0, None)
    s, gamma, tau = _check_args(w, gamma, tau)
    delta, it, resid, ok = _solve(s, gamma, tau)
    return DECtx(gamma, s, V, tau, delta, ok, it, resid)


def spectrum_context(spectrum, gamma, tau):
    """Context from bare eigenvalues (``Sigma`` taken diagonal in that order)."""
    s, gamma, tau = _check_args(spectrum, gamma, tau)
    delta, it, resid, ok = _solve(s, gamma, tau)
    return DECtx(gamma, s, None, tau, delta, ok, it, resid)


class SpectralResolvent:
    """``Q = (tau I + delta Sigma)^{-1}`` applied through the eigenbasis."""

    def __init__(self, ctx):
        q = ctx.q_eigenvalues
        if not np.all(np.isfinite(q)):
            raise ValueError("resolvent is singular (tau = 0 and a zero eigenvalue)")
        self.eigenvalues = q
        self.eigvecs = ctx.eigvecs

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        q = self.eigenvalues if x.ndim == 1 else self.eigenvalues[:, None]
        if self.eigvecs is None:
            return q * x
        return self.eigvecs @ (q * (self.eigvecs.T @ x))

    def matrix(self):
        if self.eigvecs is None:
            return np.diag(self.eigenvalues)
        return (self.eigvecs * self.eigenvalues) @ self.eigvecs.T


def resolvent_q(ctx):
    return SpectralResolvent(ctx)


def _basis(ctx):
    return np.eye(ctx.p) if ctx.eigvecs is None else ctx.eigvecs


def t_functional(ctx0, ctx1, Sigma1):
    """``p^{-1} Tr(Q1 Sigma1 Q1 (Q0 - tau0 Q0^2))`` at the instance's ``p``.

    When ``Sigma1`` is diagonal in the source eigenbasis the trace is a sum
    over paired eigenvalues; otherwise dense products are used.
    """
    Sigma1 = np.asarray(Sigma1, dtype=float)
    p = ctx0.p
    if ctx1.p != p or Sigma1.shape != (p, p):
        raise ValueError("source and target contexts must share the dimension p")
    q0 = ctx0.q_eigenvalues
    src = q0 - ctx0.tau * q0 * q0
    B0 = _basis(ctx0)
    S1_in_0 = B0.T @ Sigma1 @ B0
    off = S1_in_0 - np.diag(np.diag(S1_in_0))
    scale = max(np.max(np.abs(S1_in_0)), 1.0)
    if np.max(np.abs(off)) <= COMMUTE_ATOL * scale:
        s1 = np.diag(S1_in_0)
        q1 = 1.0 / (ctx1.tau + ctx1.delta * s1)
        return float(np.mean(s1 * q1 * q1 * src))
    Q1 = resolvent_q(ctx1).matrix()
    A0 = (B0 * src) @ B0.T
    return float(np.trace(Q1 @ Sigma1 @ Q1 @ A0) / p)


def asymptotic_sides(tp, tau0, tau1, gamma0=None, gamma1=None):
    """``(lhs, rhs)`` of the asymptotic criterion for a :class:`TaskPair`.

    ``gamma0``/``gamma1`` override ``p / n_i`` when the aspect ratio is meant
    exactly rather than through rounded sample sizes.
    """
    g0 = tp.gamma0 if gamma0 is None else gamma0
    g1 = tp.gamma1 if gamma1 is None else gamma1
    ctx0 = de_context(tp.Sigma0, g0, tau0)
    ctx1 = de_context(tp.Sigma1, g1, tau1)
    Q0 = resolvent_q(ctx0)
    Q1 = resolvent_q(ctx1)
    m = Q1.apply(tp.w0 - tau0 * Q0.apply(tp.w0))
    S1 = tp.Sigma1
    lhs = 2.0 * float(m @ S1 @ Q1.apply(tp.w1))
    rhs = float(m @ S1 @ m) + tp.sigma0**2 * ctx0.gamma * t_functional(ctx0, ctx1, S1)
    return lhs, rhs


def asymptotic_boundary(tp, tau0, tau1, gamma0=None, gamma1=None):
    """Deterministic-equivalent transfer criterion for general covariances."""
    lhs, rhs = asymptotic_sides(tp, tau0, tau1, gamma0, gamma1)
    return BoundaryVerdict.decide(lhs, rhs, Criterion.ASYMPTOTIC)


def isotropic_a(tau, gamma):
    """Positive root of ``gamma a^2 + tau a - 1 = 0``, in ``(0, 1/sqrt(gamma)]``."""
    tau, gamma = float(tau), float(gamma)
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if not tau >= 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    # 2 / (tau + sqrt(tau^2 + 4 gamma)) avoids cancellation for large tau
    return float(2.0 / (tau + np.sqrt(tau * tau + 4.0 * gamma)))


def isotropic_asymptotic_boundary(w0_norm_sq, rho, sigma0, gamma0, tau0):
    """Isotropic asymptotic criterion ``2 rho > gamma0 a0^2 |w0|^2 + sigma0^2 gamma0 a0``.

    Independent of the target penalty, aspect ratio and noise.
    """
    a0 = isotropic_a(tau0, gamma0)
    rhs = gamma0 * a0 * a0 * w0_norm_sq + sigma0**2 * gamma0 * a0
    return BoundaryVerdict.decide(2.0 * rho, rhs, Criterion.ASYMPTOTIC_ISOTROPIC)
