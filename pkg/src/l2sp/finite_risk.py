"""Finite-sample risk of scratch and L2-SP transfer ridge.

Noise is always integrated out analytically; only the designs are Monte
Carlo'd. For fixed designs write ``L1 = lambda1 M1`` with
``M_i = (X_i^T X_i + lambda_i I)^{-1}``, ``u = M0 X0^T X0 w0`` and
``K = L1 Sigma1 L1``. Then

* transfer bias        ``B  = (u - w1)^T K (u - w1)``
* source-noise term    ``V0 = |L1 M0 X0^T|^2_{Sigma1,F}``
* target-noise term    ``V1 = |M1 X1^T|^2_{Sigma1,F}``
* scratch bias         ``w1^T K w1``, scratch variance ``V1``

and the transfer risk is ``B + sigma0^2 V0 + sigma1^2 V1``. Everything is
evaluated through thin SVDs, where ``lambda = 0`` is the exact ridgeless
limit (``L1 -> I - P1``, ``M0 X0^T -> X0^+``) rather than a tiny penalty.

The boundary sides reported by :func:`finite_boundary` are multiplied by
``lambda1^2`` relative to the textbook form, i.e.
``lhs = 2 E<L1 u, L1 w1>_{Sigma1}`` and
``rhs = E|L1 u|^2_{Sigma1} + sigma0^2 E V0``. The verdict is unchanged for
``lambda1 > 0``, the ridgeless case stays finite, and ``lhs - rhs`` equals the
risk gap ``R^S - R^TL`` replicate by replicate.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from l2sp.linalg import thin_svd
from l2sp.task import sample_design

TERM_FIELDS = ("bias", "var_source", "var_target", "scratch_bias", "scratch_var",
               "prior_bias", "alignment")
_IDX = {name: i for i, name in enumerate(TERM_FIELDS)}


class Criterion(str, enum.Enum):
    FINITE = "FiniteGeneral"
    FINITE_ISOTROPIC_RIDGELESS = "FiniteIsotropicRidgeless"
    ASYMPTOTIC = "Asymptotic"
    ASYMPTOTIC_ISOTROPIC = "AsymptoticIsotropic"


@dataclass(frozen=True)
class BoundaryVerdict:
    lhs: float
    rhs: float
    transfer_beneficial: bool
    criterion: Criterion
    stderr: float | None = None

    @classmethod
    def decide(cls, lhs, rhs, criterion, stderr=None):
        # strict: equality is not a benefit
        return cls(float(lhs), float(rhs), bool(lhs > rhs), criterion, stderr)


@dataclass(frozen=True)
class RiskTerms:
    """Noise-integrated risk pieces for one fixed pair of designs."""

    bias: float
    var_source: float
    var_target: float
    scratch_bias: float
    scratch_var: float
    prior_bias: float
    alignment: float

    def transfer_risk(self, sigma0, sigma1):
        return self.bias + sigma0**2 * self.var_source + sigma1**2 * self.var_target

    def scratch_risk(self, sigma1):
        return self.scratch_bias + sigma1**2 * self.scratch_var


@dataclass(frozen=True)
class RiskReport:
    scratch_risk: float
    transfer_risk: float
    transfer_bias: float
    transfer_var_source: float
    transfer_var_target: float
    delta: float
    mc_replicates: int
    mc_stderr: float


def _check_lambda(lam, name):
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {lam}")
    return lam


def _terms_block(X0, X1, tp, lambda0s, lambda1):
    """Risk terms for one design pair over several source penalties.

    Returns an array of shape ``(len(lambda0s), len(TERM_FIELDS))``. The
    target-side matrix ``K`` and the Gram ``V0^T K V0`` are built once and
    reused for every ``lambda0``.
    """
    S1 = tp.Sigma1
    _, s1, V1 = thin_svd(X1)
    s1sq = s1 * s1
    L1 = -(V1 * (s1sq / (s1sq + lambda1))) @ V1.T
    L1[np.diag_indices_from(L1)] += 1.0
    K = L1 @ L1 if tp._sqrt1 is None else L1 @ S1 @ L1
    h1 = s1 / (s1sq + lambda1)
    var_target = float(np.sum(h1 * h1 * np.einsum("ik,ik->k", V1, S1 @ V1)))
    Kw1 = K @ tp.w1
    scratch_bias = float(tp.w1 @ Kw1)

    _, s0, V0 = thin_svd(X0)
    s0sq = s0 * s0
    G_diag = np.einsum("ik,ik->k", V0, K @ V0)
    v = V0.T @ tp.w0

    out = np.empty((len(lambda0s), len(TERM_FIELDS)))
    for j, lam0 in enumerate(lambda0s):
        u = V0 @ (s0sq / (s0sq + lam0) * v)
        Ku = K @ u
        e = u - tp.w1
        h0 = s0 / (s0sq + lam0)
        out[j] = (
            e @ (K @ e),
            np.sum(h0 * h0 * G_diag),
            var_target,
            scratch_bias,
            var_target,
            u @ Ku,
            2.0 * (u @ Kw1),
        )
    return out


def conditional_risk_terms(X0, X1, tp, lambda0, lambda1):
    """Noise-integrated risk terms for the given designs (no design average)."""
    X0 = np.asarray(X0, dtype=float)
    X1 = np.asarray(X1, dtype=float)
    if X0.shape != (X0.shape[0], tp.p) or X1.shape != (X1.shape[0], tp.p):
        raise ValueError(f"designs must have {tp.p} columns, got {X0.shape} and {X1.shape}")
    lam0 = _check_lambda(lambda0, "lambda0")
    lam1 = _check_lambda(lambda1, "lambda1")
    return RiskTerms(*_terms_block(X0, X1, tp, [lam0], lam1)[0])


def replicate_terms(tp, lambda0s, lambda1, replicates, seed, workers=1, law="normal"):
    """Per-replicate risk terms, shape ``(replicates, len(lambda0s), 7)``.

    Replicate ``r`` always uses the designs of ``sample_design(tp, r, seed)``,
    so results do not depend on ``workers`` or scheduling order.
    """
    replicates = int(replicates)
    if replicates < 2:
        raise ValueError(f"replicates must be >= 2, got {replicates}")
    lam0s = [_check_lambda(l, "lambda0") for l in np.atleast_1d(lambda0s)]
    lam1 = _check_lambda(lambda1, "lambda1")
    out = np.empty((replicates, len(lam0s), len(TERM_FIELDS)))

    def run(r):
        ds = sample_design(tp, r, seed, law=law)
        out[r] = _terms_block(ds.X0, ds.X1, tp, lam0s, lam1)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, range(replicates)))
    else:
        for r in range(replicates):
            run(r)
    return out


def _mean_stderr(x):
    x = np.asarray(x, dtype=float)
    return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(x.size))


def summarize(terms, sigma0, sigma1):
    """Aggregate ``(R, 7)`` replicate terms into a :class:`RiskReport`."""
    t = np.asarray(terms)
    bias = t[:, _IDX["bias"]]
    v0 = sigma0**2 * t[:, _IDX["var_source"]]
    v1 = sigma1**2 * t[:, _IDX["var_target"]]
    transfer = bias + v0 + v1
    scratch = t[:, _IDX["scratch_bias"]] + sigma1**2 * t[:, _IDX["scratch_var"]]
    delta, se = _mean_stderr(scratch - transfer)
    return RiskReport(
        scratch_risk=float(np.mean(scratch)),
        transfer_risk=float(np.mean(transfer)),
        transfer_bias=float(np.mean(bias)),
        transfer_var_source=float(np.mean(v0)),
        transfer_var_target=float(np.mean(v1)),
        delta=delta,
        mc_replicates=t.shape[0],
        mc_stderr=se,
    )


def boundary_from_terms(terms, sigma0):
    """Finite-sample boundary sides from ``(R, 7)`` replicate terms."""
    t = np.asarray(terms)
    lhs = t[:, _IDX["alignment"]]
    rhs = t[:, _IDX["prior_bias"]] + sigma0**2 * t[:, _IDX["var_source"]]
    _, se = _mean_stderr(lhs - rhs)
    return BoundaryVerdict.decide(np.mean(lhs), np.mean(rhs), Criterion.FINITE, se)


def mc_risk_curve(tp, lambda0s, lambda1, replicates, seed, workers=1, law="normal"):
    """One :class:`RiskReport` per source penalty, on common random designs."""
    t = replicate_terms(tp, lambda0s, lambda1, replicates, seed, workers, law)
    return [summarize(t[:, j], tp.sigma0, tp.sigma1) for j in range(t.shape[1])]


def mc_expected_risk(tp, lambda0, lambda1, replicates, seed, workers=1, law="normal"):
    """Monte Carlo estimate of scratch and transfer risk over random designs."""
    return mc_risk_curve(tp, [lambda0], lambda1, replicates, seed, workers, law)[0]


def finite_boundary(tp, lambda0, lambda1, replicates, seed, workers=1, law="normal"):
    """Monte Carlo evaluation of the finite-sample transfer criterion."""
    t = replicate_terms(tp, [lambda0], lambda1, replicates, seed, workers, law)
    return boundary_from_terms(t[:, 0], tp.sigma0)


def isotropic_ridgeless_boundary(w0_norm_sq, rho, sigma0, n0, p):
    """Closed-form ridgeless isotropic criterion.

    Transfer helps iff ``2 rho > |w0|^2 + sigma0^2 p / (p - n0 - 1)``; it does
    not involve the target sample size or noise.
    """
    denom = p - n0 - 1
    if denom <= 0:
        raise ValueError(f"need n0 < p - 1, got n0={n0}, p={p}")
    rhs = w0_norm_sq + sigma0**2 * p / denom
    return BoundaryVerdict.decide(2.0 * rho, rhs, Criterion.FINITE_ISOTROPIC_RIDGELESS)
