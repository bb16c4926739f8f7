"""Transfer-optimal source regularization in the isotropic asymptotic setting.

Parametrising the source penalty by ``a = a0(tau0) in (0, 1/sqrt(gamma0)]``,
the asymptotic transfer risk is ``|w1|^2 + f(a)`` with

    f(a) = -2 gamma0 rho a^2 + gamma0^2 |w0|^2 a^4 + sigma0^2 gamma0^2 a^3,

so maximizing the transfer benefit means minimizing ``f``. Throughout,
``w0_norm_sq`` is ``|w0|^2`` and ``rho`` is ``<w0, w1>``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from l2sp.det_equiv import isotropic_a

log = logging.getLogger(__name__)

COINCIDENT_RTOL = 1e-10


class NoPositiveAlignmentError(ValueError):
    """Alignment ``rho <= 0``: the benefit is maximized by not transferring."""


class Regime(str, enum.Enum):
    STRONGER = "StrongerThanSource"
    WEAKER = "WeakerThanSource"
    COINCIDENT = "Coincident"


class Alignment(str, enum.Enum):
    POOR = "Poor"
    STRONG = "Strong"
    CRITICAL = "Critical"


@dataclass(frozen=True)
class SourceOptResult:
    a0_star: float
    tau0_star: float
    tau0_source_opt: float
    a0_source: float
    regime: Regime
    sigma0_star: float | None
    alignment_regime: Alignment
    clamped: bool = False


def _feasible(a0, gamma0):
    a0, gamma0 = np.asarray(a0, dtype=float), float(gamma0)
    if not gamma0 > 0:
        raise ValueError(f"gamma0 must be > 0, got {gamma0}")
    amax = 1.0 / np.sqrt(gamma0)
    if not (np.all(a0 > 0.0) and np.all(a0 <= amax * (1 + 1e-12))):
        raise ValueError(f"a0 outside the feasible interval (0, {amax}]")
    a = np.minimum(a0, amax)
    return (float(a) if a.ndim == 0 else a), gamma0


def transfer_objective(a0, gamma0, w0_norm_sq, rho, sigma0):
    """``f(a0)``; the asymptotic transfer risk is ``|w1|^2 + f(a0)``.

    Vectorized over ``a0``.
    """
    a, g = _feasible(a0, gamma0)
    return -2 * g * rho * a**2 + g**2 * w0_norm_sq * a**4 + sigma0**2 * g**2 * a**3


def transfer_objective_grad(a0, gamma0, w0_norm_sq, rho, sigma0):
    a, g = float(a0), float(gamma0)
    return a * g * (-4 * rho + 4 * g * w0_norm_sq * a**2 + 3 * sigma0**2 * g * a)


def _a0_star_raw(gamma0, w0_norm_sq, rho, sigma0):
    if not gamma0 > 0:
        raise ValueError(f"gamma0 must be > 0, got {gamma0}")
    if not w0_norm_sq > 0:
        raise ValueError("w0_norm_sq must be > 0")
    if not rho > 0:
        raise NoPositiveAlignmentError(
            f"rho={rho} <= 0: no positive-alignment optimum, transferring does not help")
    b = 3 * sigma0**2 * gamma0
    # positive root of 4 g W a^2 + b a - 4 rho = 0, written without cancellation
    return float(8 * rho / (b + np.sqrt(b * b + 64 * gamma0 * w0_norm_sq * rho)))


def a0_star(gamma0, w0_norm_sq, rho, sigma0):
    """Minimizer of :func:`transfer_objective` on ``(0, 1/sqrt(gamma0)]``.

    The interior stationary point is clamped to ``1/sqrt(gamma0)`` (``tau0 = 0``)
    when it falls outside the interval, which needs ``rho > |w0|^2``.
    """
    a = _a0_star_raw(gamma0, w0_norm_sq, rho, sigma0)
    amax = 1.0 / np.sqrt(gamma0)
    if a > amax:
        log.warning("a0* = %.6g exceeds 1/sqrt(gamma0) = %.6g; clamped (tau0* = 0)", a, amax)
        return float(amax)
    return a


def tau_from_a(a0, gamma0):
    """Inverse of :func:`isotropic_a`: ``tau = (1 - gamma0 a0^2) / a0``."""
    a, g = _feasible(a0, gamma0)
    t = np.maximum((1.0 - g * a * a) / a, 0.0)
    return float(t) if np.ndim(t) == 0 else t


def source_optimal_tau(gamma0, w0_norm_sq, sigma0):
    """Ridge penalty minimizing the source risk, ``gamma0 sigma0^2 / |w0|^2``."""
    if not w0_norm_sq > 0:
        raise ValueError("source signal is zero; the source-optimal penalty is undefined")
    return float(gamma0 * sigma0**2 / w0_norm_sq)


def alignment_regime(w0_norm_sq, rho):
    thr = 0.75 * w0_norm_sq
    if np.isclose(rho, thr, rtol=1e-12, atol=0.0):
        return Alignment.CRITICAL
    return Alignment.STRONG if rho > thr else Alignment.POOR


def sigma0_star(gamma0, w0_norm_sq, rho):
    """Source noise level at which ``tau0*`` crosses the source-optimal penalty.

    Defined for ``3/4 |w0|^2 < rho < |w0|^2``; returns ``None`` when the
    alignment is at or below the ``3/4`` threshold.
    """
    W = w0_norm_sq
    if not rho > 0 or not W > rho:
        raise ValueError(f"need |w0|^2 > rho > 0, got |w0|^2={W}, rho={rho}")
    return _sigma0_star(gamma0, W, rho)


def _sigma0_star(gamma0, W, rho):
    excess = W * rho - 0.75 * W * W
    if excess <= 0 or alignment_regime(W, rho) is Alignment.CRITICAL:
        return None
    return float(np.sqrt(2 * (W * W - W * rho) / np.sqrt(gamma0 * excess)))


def crossover_function(sigma0, gamma0, w0_norm_sq, rho):
    """Sign of ``a0* - a0^S``: positive means ``tau0*`` is below source-optimal."""
    x = sigma0**2 * gamma0
    C = 64 * gamma0 * w0_norm_sq * rho
    D = 64 * gamma0 * w0_norm_sq**2
    return x + np.sqrt(9 * x * x + C) - np.sqrt(16 * x * x + D)


def optimize_source(gamma0, w0_norm_sq, rho, sigma0):
    """Transfer-optimal versus source-optimal penalty, with regime labels.

    ``rho > |w0|^2`` is accepted (the optimum is then clamped at ``tau0 = 0``
    and no noise threshold is reported).
    """
    raw = _a0_star_raw(gamma0, w0_norm_sq, rho, sigma0)
    a_star = a0_star(gamma0, w0_norm_sq, rho, sigma0)
    t_star = tau_from_a(a_star, gamma0)
    t_src = source_optimal_tau(gamma0, w0_norm_sq, sigma0)
    gap = t_star - t_src
    if abs(gap) <= COINCIDENT_RTOL * max(1.0, t_src):
        regime = Regime.COINCIDENT
    else:
        regime = Regime.STRONGER if gap > 0 else Regime.WEAKER
    s_star = _sigma0_star(gamma0, w0_norm_sq, rho) if rho <= w0_norm_sq else None
    return SourceOptResult(
        a0_star=a_star,
        tau0_star=t_star,
        tau0_source_opt=t_src,
        a0_source=float(isotropic_a(t_src, gamma0)),
        regime=regime,
        sigma0_star=s_star,
        alignment_regime=alignment_regime(w0_norm_sq, rho),
        clamped=bool(raw > a_star),
    )
