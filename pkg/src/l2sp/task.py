"""Transfer problem instances and seeded random designs.

A :class:`TaskPair` fixes everything except the randomness: the source and
target covariances, signals, noise levels and sample sizes. Designs are drawn
as ``X_i = Z_i Sigma_i^{1/2}`` with ``y_i = X_i w_i + eps_i``.

Every random stream is keyed on ``(seed, replicate, stream)`` through
``numpy.random.SeedSequence`` feeding a counter-based Philox generator, so a
replicate can be regenerated on its own, in any order, on any thread.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from l2sp.linalg import LinalgInputError, spd_sqrt

STREAMS = {"Z0": 0, "Z1": 1, "eps0": 2, "eps1": 3}
ENTRY_LAWS = ("normal", "rademacher")


class InfeasibleTaskError(ValueError):
    """Raised when task parameters cannot describe a valid instance."""


@dataclass(frozen=True, eq=False)
class TaskPair:
    p: int
    n0: int
    n1: int
    sigma0: float
    sigma1: float
    Sigma0: np.ndarray
    Sigma1: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    _sqrt0: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)
    _sqrt1: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        p = int(self.p)
        object.__setattr__(self, "p", p)
        if p < 3:
            raise InfeasibleTaskError(f"p must be >= 3, got {p}")
        for name in ("n0", "n1"):
            n = int(getattr(self, name))
            object.__setattr__(self, name, n)
            if not 1 <= n < p - 1:
                raise InfeasibleTaskError(
                    f"{name}={n} outside the overparameterized range 1 <= n < p - 1 = {p - 1}"
                )
        for name in ("sigma0", "sigma1"):
            s = float(getattr(self, name))
            if not np.isfinite(s) or s < 0:
                raise InfeasibleTaskError(f"{name} must be finite and >= 0, got {s}")
            object.__setattr__(self, name, s)
        for name in ("w0", "w1"):
            w = np.asarray(getattr(self, name), dtype=float)
            if w.shape != (p,) or not np.all(np.isfinite(w)):
                raise InfeasibleTaskError(f"{name} must be a finite vector of length {p}")
            object.__setattr__(self, name, w)
        for name, root in (("Sigma0", "_sqrt0"), ("Sigma1", "_sqrt1")):
            S = np.asarray(getattr(self, name), dtype=float)
            if S.shape != (p, p):
                raise InfeasibleTaskError(f"{name} must have shape {(p, p)}, got {S.shape}")
            try:
                R = None if _is_identity(S) else spd_sqrt(S)
            except LinalgInputError as exc:
                raise InfeasibleTaskError(f"{name}: {exc}") from exc
            object.__setattr__(self, name, S)
            object.__setattr__(self, root, R)

    @property
    def isotropic(self):
        return self._sqrt0 is None and self._sqrt1 is None

    @property
    def gamma0(self):
        return self.p / self.n0

    @property
    def gamma1(self):
        return self.p / self.n1

    def replace(self, **changes):
        """Copy with some fields changed (re-validated)."""
        kw = {k: getattr(self, k) for k in
              ("p", "n0", "n1", "sigma0", "sigma1", "Sigma0", "Sigma1", "w0", "w1")}
        kw.update(changes)
        return TaskPair(**kw)


def _is_identity(S):
    return np.array_equal(S, np.eye(S.shape[0]))


@dataclass(frozen=True, eq=False)
class DesignSample:
    X0: np.ndarray
    y0: np.ndarray
    X1: np.ndarray
    y1: np.ndarray
    seed: int
    replicate_index: int


@dataclass(frozen=True)
class AlignmentSummary:
    rho: float
    w0_norm_sq: float
    w1_norm_sq: float


def signal_frame(p, seed=0):
    """Two orthonormal directions in R^p, fixed by ``seed``.

    The first two standard basis vectors carried through a seeded random
    rotation; reproducible without storing vectors.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(0xF7A3E,))))
    Q, R = np.linalg.qr(rng.standard_normal((p, 2)))
    return Q * np.sign(np.diag(R))


def make_isotropic_pair(p, n0, n1, w0_norm, rho, w1_norm, sigma0, sigma1, seed=0):
    """Isotropic instance (``Sigma0 = Sigma1 = I``) with prescribed geometry.

    ``w0`` has norm ``w0_norm``; ``w1`` lies in the span of ``w0`` and one
    orthogonal direction with ``<w0, w1> = rho`` and ``|w1| = w1_norm``.
    """
    w0_norm, w1_norm, rho = float(w0_norm), float(w1_norm), float(rho)
    if w0_norm < 0 or w1_norm < 0:
        raise InfeasibleTaskError("signal norms must be >= 0")
    bound = w0_norm * w1_norm
    if abs(rho) > bound * (1 + 1e-12) + 1e-300:
        raise InfeasibleTaskError(f"|rho|={abs(rho)} exceeds Cauchy-Schwarz bound {bound}")
    q1, q2 = signal_frame(p, seed).T
    w0 = w0_norm * q1
    along = rho / w0_norm if w0_norm > 0 else 0.0
    perp = np.sqrt(max(w1_norm**2 - along**2, 0.0))
    w1 = along * q1 + perp * q2
    eye = np.eye(p)
    return TaskPair(p=p, n0=n0, n1=n1, sigma0=sigma0, sigma1=sigma1,
                    Sigma0=eye, Sigma1=eye.copy(), w0=w0, w1=w1)


def make_pair(p, n0, n1, w0_norm, rho, w1_norm, sigma0, sigma1, Sigma0=None, Sigma1=None, seed=0):
    """Like :func:`make_isotropic_pair` but with optional covariances."""
    tp = make_isotropic_pair(p, n0, n1, w0_norm, rho, w1_norm, sigma0, sigma1, seed)
    if Sigma0 is None and Sigma1 is None:
        return tp
    return tp.replace(Sigma0=tp.Sigma0 if Sigma0 is None else Sigma0,
                      Sigma1=tp.Sigma1 if Sigma1 is None else Sigma1)


def stream(seed, replicate, tag):
    """Independent generator for one ``(seed, replicate, tag)`` triple."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), STREAMS[tag]))
    return np.random.Generator(np.random.Philox(ss))


def _entries(rng, shape, law):
    if law == "normal":
        return rng.standard_normal(shape)
    if law == "rademacher":
        return 2.0 * rng.integers(0, 2, size=shape) - 1.0
    raise ValueError(f"unknown entry law {law!r}; expected one of {ENTRY_LAWS}")


def sample_design(tp, replicate, seed, law="normal"):
    """Draw one :class:`DesignSample` for replicate ``replicate``."""
    Z0 = _entries(stream(seed, replicate, "Z0"), (tp.n0, tp.p), law)
    Z1 = _entries(stream(seed, replicate, "Z1"), (tp.n1, tp.p), law)
    X0 = Z0 if tp._sqrt0 is None else Z0 @ tp._sqrt0
    X1 = Z1 if tp._sqrt1 is None else Z1 @ tp._sqrt1
    e0 = stream(seed, replicate, "eps0").standard_normal(tp.n0)
    e1 = stream(seed, replicate, "eps1").standard_normal(tp.n1)
    return DesignSample(X0=X0, y0=X0 @ tp.w0 + tp.sigma0 * e0,
                        X1=X1, y1=X1 @ tp.w1 + tp.sigma1 * e1,
                        seed=int(seed), replicate_index=int(replicate))


def alignment(tp):
    return AlignmentSummary(rho=float(tp.w0 @ tp.w1),
                            w0_norm_sq=float(tp.w0 @ tp.w0),
                            w1_norm_sq=float(tp.w1 @ tp.w1))


def diag_covariance(spectrum):
    """Diagonal covariance from a list of eigenvalues."""
    s = np.asarray(spectrum, dtype=float)
    if s.ndim != 1 or not np.all(np.isfinite(s)) or np.any(s < 0):
        raise InfeasibleTaskError("spectrum must be a finite, non-negative list")
    return np.diag(s)
