import numpy as np
import pytest
from hypothesis import given, strategies as st

from l2sp.det_equiv import isotropic_a, isotropic_asymptotic_boundary
from l2sp.source_opt import (Alignment, NoPositiveAlignmentError, Regime, a0_star,
                             alignment_regime, crossover_function, optimize_source,
                             sigma0_star, source_optimal_tau, tau_from_a, transfer_objective,
                             transfer_objective_grad)

params = dict(gamma0=st.floats(0.5, 8), W=st.floats(0.2, 5), frac=st.floats(0.01, 0.99),
              sigma0=st.floats(0.0, 3))


def test_objective_examples():
    assert abs(transfer_objective(1e-9, 1.0, 1.0, 1.0, 0.5)) < 1e-15
    assert transfer_objective(1.0, 1.0, 1.0, 1.0, 0.0) == pytest.approx(-1.0)
    f = [transfer_objective(0.4, 2.0, 1.0, 0.6, s) for s in (0.0, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(f) > 0)
    with pytest.raises(ValueError):
        transfer_objective(1.5, 1.0, 1.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        transfer_objective(0.0, 1.0, 1.0, 0.5, 0.0)


def test_a0_star_noiseless():
    assert a0_star(1.0, 1.0, 1.0, 0.0) == pytest.approx(1.0)
    assert tau_from_a(a0_star(1.0, 1.0, 1.0, 0.0), 1.0) == pytest.approx(0.0, abs=1e-15)
    g, W, rho = 2.0, 1.5, 0.4
    assert a0_star(g, W, rho, 0.0) == pytest.approx(np.sqrt(rho / (g * W)), rel=1e-14)


def test_a0_star_vanishes_with_noise():
    vals = [a0_star(1.0, 1.0, 0.5, s) for s in (1.0, 10.0, 100.0, 1000.0)]
    assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-5


def test_a0_star_rejects_nonpositive_alignment():
    for rho in (0.0, -0.3):
        with pytest.raises(NoPositiveAlignmentError, match="no positive-alignment optimum"):
            a0_star(1.0, 1.0, rho, 0.5)


@given(**params)
def test_a0_star_stationary_and_optimal(gamma0, W, frac, sigma0):
    rho = frac * W
    a = a0_star(gamma0, W, rho, sigma0)
    assert abs(transfer_objective_grad(a, gamma0, W, rho, sigma0)) < 1e-10
    assert abs(-4 * rho + 4 * gamma0 * W * a * a + 3 * sigma0**2 * gamma0 * a) < 1e-10
    grid = np.linspace(1e-6, 1 / np.sqrt(gamma0), 100_000)
    f = transfer_objective(grid, gamma0, W, rho, sigma0)
    assert transfer_objective(a, gamma0, W, rho, sigma0) <= f.min() + 1e-12


def test_grid_oracle_one_million():
    g, W, rho, s = 3.0, 1.2, 0.9, 0.8
    grid = np.linspace(0, 1 / np.sqrt(g), 1_000_001)[1:]
    k = np.argmin(transfer_objective(grid, g, W, rho, s))
    assert abs(grid[k] - a0_star(g, W, rho, s)) <= grid[1] - grid[0]


def test_clamped_when_rho_exceeds_signal(caplog):
    a = a0_star(1.0, 1.0, 1.5, 0.0)
    assert a == 1.0 and "clamped" in caplog.text
    r = optimize_source(1.0, 1.0, 1.5, 0.0)
    assert r.clamped and r.tau0_star == 0.0 and r.sigma0_star is None


def test_tau_from_a_examples():
    assert tau_from_a(1 / np.sqrt(2.0), 2.0) == pytest.approx(0.0, abs=1e-15)
    assert tau_from_a(isotropic_a(1.0, 1.0), 1.0) == pytest.approx(1.0, rel=1e-12)
    assert tau_from_a(1e-8, 1.0) > 1e7
    with pytest.raises(ValueError):
        tau_from_a(1.1, 1.0)


@given(st.floats(1e-3, 1e2), st.floats(0.01, 1.0))
def test_tau_round_trip(gamma, frac):
    a = frac / np.sqrt(gamma)
    assert isotropic_a(tau_from_a(a, gamma), gamma) == pytest.approx(a, rel=1e-10)


def test_source_optimal_tau():
    assert source_optimal_tau(2.0, 1.0, 0.0) == 0.0
    assert source_optimal_tau(2.0, 1.0, np.sqrt(0.5)) == pytest.approx(1.0)
    assert source_optimal_tau(1.5, 2.0, np.sqrt(2.0)) == pytest.approx(
        2 * source_optimal_tau(1.5, 2.0, 1.0))
    with pytest.raises(ValueError):
        source_optimal_tau(1.0, 0.0, 1.0)


def test_sigma0_star_example():
    s = sigma0_star(1.0, 1.0, 7 / 8)
    assert s * s == pytest.approx(2 * (1 / 8) / np.sqrt(1 / 8), abs=1e-12)
    assert s * s == pytest.approx(0.7071068, abs=1e-6)
    assert abs(crossover_function(s, 1.0, 1.0, 7 / 8)) < 1e-8


def test_sigma0_star_existence():
    assert sigma0_star(1.0, 1.0, 0.75) is None
    assert sigma0_star(1.0, 1.0, 0.6) is None
    with pytest.raises(ValueError):
        sigma0_star(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        sigma0_star(1.0, 1.0, 0.0)


def test_alignment_regimes():
    assert alignment_regime(1.0, 0.75) is Alignment.CRITICAL
    assert alignment_regime(1.0, 0.7) is Alignment.POOR
    assert alignment_regime(1.0, 0.8) is Alignment.STRONG


def test_poor_alignment_always_stronger():
    for s in np.geomspace(0.1, 10, 25):
        r = optimize_source(1.0, 1.0, 0.7, s)
        assert r.regime is Regime.STRONGER and r.sigma0_star is None


def test_optimize_examples():
    r = optimize_source(1.0, 1.0, 1.0, 0.0)
    assert r.regime is Regime.COINCIDENT and r.tau0_star == pytest.approx(0.0, abs=1e-15)
    assert optimize_source(1.0, 1.0, 7 / 8, 0.5).regime is Regime.STRONGER
    r = optimize_source(1.0, 1.0, 7 / 8, np.sqrt(2.0))
    assert r.regime is Regime.WEAKER
    assert r.a0_source == pytest.approx(isotropic_a(r.tau0_source_opt, 1.0))
    assert r.alignment_regime is Alignment.STRONG


@given(st.floats(0.5, 8), st.floats(0.2, 5), st.floats(0.76, 0.99))
def test_crossover_sign_flip(gamma0, W, frac):
    rho = frac * W
    s = sigma0_star(gamma0, W, rho)
    below = optimize_source(gamma0, W, rho, s * (1 - 1e-3))
    above = optimize_source(gamma0, W, rho, s * (1 + 1e-3))
    assert below.tau0_star > below.tau0_source_opt
    assert above.tau0_star < above.tau0_source_opt


def test_generic_misalignment(rng):
    for _ in range(1000):
        W = rng.uniform(0.2, 5)
        r = optimize_source(rng.uniform(0.5, 8), W, rng.uniform(0.01, 0.99) * W,
                            rng.uniform(0.01, 3))
        assert abs(r.tau0_star - r.tau0_source_opt) > 1e-8


@given(**params)
def test_tau0_star_maximizes_margin(gamma0, W, frac, sigma0):
    # margin of the resolvent-form criterion, up to the positive factor a1^2
    rho = frac * W
    r = optimize_source(gamma0, W, rho, sigma0)
    taus = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 4000)])
    margins = []
    for t in taus:
        a = isotropic_a(t, gamma0)
        v = isotropic_asymptotic_boundary(W, rho, sigma0, gamma0, t)
        margins.append(gamma0 * a * a * (v.lhs - v.rhs))
    a = r.a0_star
    best = gamma0 * a * a * (2 * rho - gamma0 * a * a * W - sigma0**2 * gamma0 * a)
    assert best >= max(margins) - 1e-12
    assert best == pytest.approx(-transfer_objective(a, gamma0, W, rho, sigma0), abs=1e-12)
