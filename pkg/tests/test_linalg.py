import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from l2sp.linalg import (LinalgInputError, pseudo_inverse, ridge_solve, row_projector,
                         sigma_frob_sq, sigma_norm_sq, spd_sqrt, sym_eig, thin_svd)


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


# ridge_solve

def test_ridge_identity_design():
    np.testing.assert_allclose(ridge_solve(np.eye(3), [1.0, 2.0, 3.0], 1.0), [0.5, 1.0, 1.5])


def test_ridge_zero_response(rng):
    X = rng.standard_normal((5, 7))
    assert np.all(ridge_solve(X, np.zeros(5), 0.7) == 0)


def test_ridgeless_min_norm_interpolation():
    np.testing.assert_allclose(ridge_solve([[1.0, 0.0, 0.0]], [2.0], 0.0), [2.0, 0.0, 0.0])


@pytest.mark.parametrize("shape", [(4, 9), (9, 4)])
def test_ridge_matches_normal_equations(rng, shape):
    X = rng.standard_normal(shape)
    y = rng.standard_normal(shape[0])
    lam = 0.3
    ref = np.linalg.solve(X.T @ X + lam * np.eye(shape[1]), X.T @ y)
    np.testing.assert_allclose(ridge_solve(X, y, lam), ref, rtol=1e-10, atol=1e-12)


def test_ridge_block_rhs(rng):
    X = rng.standard_normal((4, 6))
    Y = rng.standard_normal((4, 3))
    B = ridge_solve(X, Y, 0.5)
    for k in range(3):
        np.testing.assert_allclose(B[:, k], ridge_solve(X, Y[:, k], 0.5), rtol=1e-12)


def test_ridgeless_limit_monotone(rng):
    X = rng.standard_normal((5, 12))
    y = rng.standard_normal(5)
    b0 = ridge_solve(X, y, 0.0)
    gaps = [np.linalg.norm(ridge_solve(X, y, lam) - b0) for lam in 10.0 ** -np.arange(2, 9)]
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 1e-6


def test_ridge_map_tends_to_pseudo_inverse(rng):
    X = rng.standard_normal((4, 10))
    P = pseudo_inverse(X)
    errs = [np.linalg.norm(np.linalg.solve(X.T @ X + lam * np.eye(10), X.T) - P)
            for lam in (1e-2, 1e-4, 1e-6)]
    assert errs[0] > errs[1] > errs[2]


def test_resolvent_identity(rng):
    p = 8
    X = rng.standard_normal((5, p))
    lam = 0.4
    M = np.linalg.inv(X.T @ X + lam * np.eye(p))
    assert np.linalg.norm(M @ X.T @ X - np.eye(p) + lam * M) <= 1e-9 * p


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_ridge_rejects_nonfinite(bad):
    X = np.eye(2)
    X[0, 1] = bad
    with pytest.raises(LinalgInputError):
        ridge_solve(X, [1.0, 1.0], 1.0)


def test_ridge_rejects_mismatch_and_negative_lambda():
    with pytest.raises(LinalgInputError):
        ridge_solve(np.eye(3), [1.0, 2.0], 1.0)
    with pytest.raises(LinalgInputError):
        ridge_solve(np.eye(2), [1.0, 2.0], -1.0)


# pseudo-inverse and projector

def test_pinv_diag():
    np.testing.assert_allclose(pseudo_inverse([[2.0, 0.0], [0.0, 0.0]]), [[0.5, 0.0], [0.0, 0.0]])


def test_pinv_orthonormal_rows(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((5, 3)))
    X = Q.T
    np.testing.assert_allclose(pseudo_inverse(X), X.T, atol=1e-12)


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 6)), elements=finite))
def test_penrose_conditions(X):
    P = pseudo_inverse(X)
    scale = max(np.linalg.norm(X), 1.0)
    assert np.linalg.norm(X @ P @ X - X) <= 1e-9 * scale
    assert np.linalg.norm(P @ X @ P - P) <= 1e-9 * max(np.linalg.norm(P), 1.0)
    assert np.linalg.norm((X @ P).T - X @ P) <= 1e-9
    assert np.linalg.norm((P @ X).T - P @ X) <= 1e-9


def test_pinv_reconstructs_random(rng):
    X = rng.standard_normal((3, 5))
    assert _rel(X @ pseudo_inverse(X) @ X, X) < 1e-12


def test_row_projector_examples(rng):
    np.testing.assert_allclose(row_projector([[1.0, 0.0, 0.0]]), np.diag([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(row_projector(rng.standard_normal((4, 4))), np.eye(4), atol=1e-12)
    P = row_projector(rng.standard_normal((2, 4)))
    assert np.trace(P) == pytest.approx(2.0, abs=1e-12)
    assert np.linalg.norm(P @ P - P) < 1e-9 and np.linalg.norm(P - P.T) < 1e-9


def test_thin_svd_truncates_rank():
    X = np.outer([1.0, 2.0, 3.0], [1.0, 0.0, 1.0, 0.0])
    U, s, V = thin_svd(X)
    assert s.size == 1 and V.shape == (4, 1)


# eigen, sqrt, norms

def test_sym_eig_examples():
    np.testing.assert_allclose(sym_eig(np.diag([1.0, 3.0]))[0], [3.0, 1.0])
    np.testing.assert_allclose(sym_eig(np.eye(3))[0], [1.0, 1.0, 1.0])
    w, V = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(w, [3.0, 1.0])
    np.testing.assert_allclose(V @ np.diag(w) @ V.T, [[2.0, 1.0], [1.0, 2.0]], atol=1e-12)


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(LinalgInputError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_spd_sqrt_examples(rng):
    np.testing.assert_allclose(spd_sqrt(np.eye(3)), np.eye(3), atol=1e-14)
    np.testing.assert_allclose(spd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    A = rng.standard_normal((6, 6))
    S = A @ A.T
    R = spd_sqrt(S)
    assert _rel(R @ R, S) < 1e-9
    np.testing.assert_allclose(R, R.T)


def test_spd_sqrt_rejects_negative():
    with pytest.raises(LinalgInputError):
        spd_sqrt(np.diag([1.0, -0.5]))


def test_sigma_norms(rng):
    assert sigma_norm_sq(np.array([1.0, 0.0]), np.eye(2)) == 1.0
    assert sigma_norm_sq(np.zeros(3), np.eye(3)) == 0.0
    assert sigma_norm_sq(np.array([1.0, 1.0]), np.array([[2.0, 1.0], [1.0, 2.0]])) == 6.0
    assert sigma_frob_sq(np.eye(4), np.eye(4)) == 4.0
    assert sigma_frob_sq(np.zeros((3, 2)), np.eye(3)) == 0.0
    A = rng.standard_normal((3, 2))
    assert sigma_frob_sq(A, np.eye(3)) == pytest.approx(np.sum(A**2), rel=1e-14)
    with pytest.raises(LinalgInputError):
        sigma_norm_sq(np.ones(2), np.eye(3))
