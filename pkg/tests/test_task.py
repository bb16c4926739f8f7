import numpy as np
import pytest
from hypothesis import given, strategies as st

from l2sp.task import (InfeasibleTaskError, TaskPair, alignment, diag_covariance,
                       make_isotropic_pair, make_pair, sample_design)


def test_identical_when_fully_aligned():
    tp = make_isotropic_pair(20, 5, 5, 1.0, 1.0, 1.0, 0.1, 0.1)
    np.testing.assert_allclose(tp.w1, tp.w0, atol=1e-12)


def test_orthogonal_when_rho_zero():
    tp = make_isotropic_pair(20, 5, 5, 1.0, 0.0, 1.0, 0.1, 0.1)
    assert abs(tp.w0 @ tp.w1) < 1e-12


def test_sixty_degrees():
    tp = make_isotropic_pair(20, 5, 5, 1.0, 0.5, 1.0, 0.1, 0.1)
    a = alignment(tp)
    assert a.rho == pytest.approx(0.5, abs=1e-12)
    cos = a.rho / np.sqrt(a.w0_norm_sq * a.w1_norm_sq)
    assert np.degrees(np.arccos(cos)) == pytest.approx(60.0, abs=1e-9)


@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(-1, 1))
def test_geometry_exact(w0n, w1n, frac):
    rho = frac * w0n * w1n
    tp = make_isotropic_pair(10, 3, 3, w0n, rho, w1n, 0.0, 0.0)
    assert tp.w0 @ tp.w1 == pytest.approx(rho, abs=1e-12 * max(1, w0n * w1n))
    assert np.linalg.norm(tp.w1) == pytest.approx(w1n, abs=1e-12 * max(1, w1n))


def test_alignment_signs():
    tp = make_isotropic_pair(10, 3, 3, 2.0, 4.0, 2.0, 0.0, 0.0)
    assert alignment(tp).rho == pytest.approx(4.0)
    neg = make_isotropic_pair(10, 3, 3, 2.0, -4.0, 2.0, 0.0, 0.0)
    assert alignment(neg).rho == pytest.approx(-4.0)


def test_infeasible_inputs():
    with pytest.raises(InfeasibleTaskError):
        make_isotropic_pair(10, 3, 3, 1.0, 1.5, 1.0, 0.0, 0.0)
    with pytest.raises(InfeasibleTaskError):
        make_isotropic_pair(10, 9, 3, 1.0, 0.5, 1.0, 0.0, 0.0)
    with pytest.raises(InfeasibleTaskError):
        make_isotropic_pair(10, 3, 3, 1.0, 0.5, 1.0, -0.1, 0.0)


def test_noiseless_labels():
    tp = make_isotropic_pair(30, 10, 12, 1.0, 0.3, 1.0, 0.0, 0.0)
    ds = sample_design(tp, 3, 7)
    np.testing.assert_array_equal(ds.y0, ds.X0 @ tp.w0)
    np.testing.assert_array_equal(ds.y1, ds.X1 @ tp.w1)


def test_design_moments():
    tp = make_isotropic_pair(500, 250, 10, 1.0, 0.3, 1.0, 0.0, 0.0)
    X = sample_design(tp, 0, 1).X0
    assert abs(X.mean()) < 0.01
    assert X.var() == pytest.approx(1.0, rel=0.05)


def test_reproducible_and_replicates_differ():
    tp = make_isotropic_pair(30, 10, 12, 1.0, 0.3, 1.0, 0.5, 0.5)
    a, b = sample_design(tp, 4, 99), sample_design(tp, 4, 99)
    for f in ("X0", "y0", "X1", "y1"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    c = sample_design(tp, 5, 99)
    assert not np.array_equal(a.X0, c.X0)


def test_source_target_independent():
    tp = make_isotropic_pair(20, 5, 5, 1.0, 0.3, 1.0, 0.0, 0.0)
    R = 2000
    pairs = np.array([(d.X0[0, 0], d.X1[0, 0]) for d in (sample_design(tp, r, 3) for r in range(R))])
    r = np.corrcoef(pairs.T)[0, 1]
    assert abs(r) < 3 / np.sqrt(R)


def test_label_noise_variance():
    tp = make_isotropic_pair(200, 100, 10, 1.0, 0.3, 1.0, 0.7, 0.0)
    res = np.concatenate([sample_design(tp, r, 2).y0 - sample_design(tp, r, 2).X0 @ tp.w0
                          for r in range(100)])
    assert res.var() == pytest.approx(0.49, rel=0.05)


def test_rademacher_entries():
    tp = make_isotropic_pair(20, 5, 5, 1.0, 0.3, 1.0, 0.0, 0.0)
    X = sample_design(tp, 0, 1, law="rademacher").X0
    assert set(np.unique(X)) <= {-1.0, 1.0}
    with pytest.raises(ValueError):
        sample_design(tp, 0, 1, law="cauchy")


def test_covariance_applied():
    S = diag_covariance([4.0] * 5 + [1.0] * 5)
    tp = make_pair(10, 3, 3, 1.0, 0.3, 1.0, 0.0, 0.0, Sigma0=S)
    assert not tp.isotropic
    X = np.vstack([sample_design(tp, r, 0).X0 for r in range(2000)])
    assert X[:, :5].var() == pytest.approx(4.0, rel=0.05)
    assert X[:, 5:].var() == pytest.approx(1.0, rel=0.05)


def test_taskpair_validation():
    with pytest.raises(InfeasibleTaskError):
        TaskPair(p=5, n0=2, n1=2, sigma0=0.0, sigma1=0.0, Sigma0=np.eye(4), Sigma1=np.eye(5),
                 w0=np.zeros(5), w1=np.zeros(5))
