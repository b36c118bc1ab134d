import math

import mpmath
import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from mmlab.builders import path, two_point
from mmlab.dynamic import CECurve, geodesic, solve_hj, we_distance
from mmlab.flows import (HopfColeError, IKFunction, I_K, be_best_K,
                         be_best_K_closed_form, be_check, contractivity_check,
                         entropy_convexity_check, evi_integral_check,
                         evi_regularization_check, evi_witness_from_hopf_cole,
                         functional_inequalities, hopf_cole_operator, hopf_cole_solve,
                         jko_convergence_report, jko_heat_gap, jko_step, jko_trajectory,
                         max_edge_gap, metric_matrix, poincare_constant, we_oracle)
from mmlab.heat import SpectralSemigroup, entropy, heat_apply
from mmlab.space import energy, integrate, random_density, random_space

from conftest import spaces

seeds = st.integers(0, 2**31 - 1)


# -- I_K -----------------------------------------------------------------------

@pytest.mark.parametrize("K", [1e-8, -1e-8])
def test_IK_tends_to_identity(K):
    t = np.linspace(0, 1, 101)
    np.testing.assert_allclose(I_K(K, t), I_K(0.0, t), atol=1e-7)


@given(st.floats(-5, 5), st.floats(0, 2))
def test_IK_matches_high_precision_quadrature(K, t):
    with mpmath.workdps(40):
        expected = float(mpmath.quad(lambda r: mpmath.exp(K * r), [0, t]))
    assert IKFunction(K)(t) == pytest.approx(expected, rel=1e-13, abs=1e-15)


# -- gradient contractivity ---------------------------------------------------------

@given(spaces(max_n=7), seeds)
def test_be_margin_vanishes_at_time_zero(sp, seed):
    sg = SpectralSemigroup.of(sp)
    f = np.random.default_rng(seed).normal(size=(3, sp.n))
    rep = be_check(sp, sg, 123.0, f, [0.0])
    assert rep.residuals == [0.0]


def test_two_point_best_K_is_four(t2, t2_sg, rng):
    K = be_best_K(t2, t2_sg, rng.normal(size=(5, 2)), [0.05, 0.1, 0.5, 1.0])
    assert K == pytest.approx(4.0, abs=1e-6)
    assert be_check(t2, t2_sg, 4.0, [[1.0, 0.0]], [0.3]).passed
    assert not be_check(t2, t2_sg, 4.5, [[1.0, 0.0]], [0.3]).passed


@settings(max_examples=20)
@given(spaces(min_n=3, max_n=7), seeds)
def test_best_K_matches_closed_form(sp, seed):
    sg = SpectralSemigroup.of(sp)
    f = np.random.default_rng(seed).normal(size=(4, sp.n))
    times = [0.05, 0.2, 1.0]
    K = be_best_K(sp, sg, f, times)
    ref = be_best_K_closed_form(sp, sg, f, times)
    # the bisection honours the absolute margin tolerance, so it may exceed the
    # tolerance-free value slightly but never by more than what BE_TOL allows
    assert K >= ref - 1e-7
    assert be_check(sp, sg, K, f, times).passed
    assert not be_check(sp, sg, K + 1e-3 + 1e-3 * abs(K), f, times).passed


def test_best_K_of_constants_is_infinite(t2, t2_sg):
    assert be_best_K(t2, t2_sg, np.ones((2, 2)), [0.1]) == math.inf


# -- EVI -------------------------------------------------------------------------------

def test_evi_stationary_point_is_an_equality(t2, t2_sg):
    W = we_oracle(t2, N=4)
    rep = evi_integral_check(W, lambda r, t: heat_apply(t2_sg, r, t),
                             lambda r: entropy(t2, r), np.ones(2), np.ones(2), 1.0, [0.1, 0.5])
    assert rep.residuals == [0.0, 0.0]


def test_evi_flags_overstated_curvature(t2, t2_sg):
    W = we_oracle(t2, N=6)
    S = lambda r, t: heat_apply(t2_sg, r, t)  # noqa: E731
    F = lambda r: entropy(t2, r)  # noqa: E731
    xbar, sigma = np.array([1.8, 0.2]), np.array([0.4, 1.6])
    ok = evi_integral_check(W, S, F, xbar, sigma, 0.0, [0.05, 0.2])
    bad = evi_integral_check(W, S, F, xbar, sigma, 200.0, [0.05, 0.2])
    assert ok.passed
    assert not bad.passed
    reg = evi_regularization_check(W, S, F, xbar, sigma, 0.0, [0.1, 0.5])
    assert reg.passed


def test_evi_is_vacuous_for_infinite_base():
    from mmlab.builders import degenerate_grid
    sp = degenerate_grid(2, 2)
    sg = SpectralSemigroup.of(sp)
    a = np.array([2.0, 0.0, 2.0, 0.0]) / (sp.m @ np.array([2.0, 0.0, 2.0, 0.0]))
    b = np.array([1.0, 1.0, 0.0, 0.0]) / (sp.m @ np.array([1.0, 1.0, 0.0, 0.0]))
    rep = evi_integral_check(we_oracle(sp), lambda r, t: heat_apply(sg, r, t),
                             lambda r: entropy(sp, r), a, b, 1.0, [0.1])
    assert rep.extra["vacuous"] and rep.residuals == []


# -- contractivity -------------------------------------------------------------------------

@pytest.mark.parametrize("selector", ["W_E", "W_E*"])
def test_two_point_contraction_factor(t2, t2_sg, selector):
    times = [0.05, 0.1, 0.25]
    rep = contractivity_check(t2, t2_sg, selector, [1.6, 0.4], [0.3, 1.7], 4.0, times)
    assert rep.passed
    np.testing.assert_allclose(rep.extra["ratio_upper"], np.exp(-4 * np.array(times)),
                               atol=1e-3)
    with pytest.raises(ValueError):
        contractivity_check(t2, t2_sg, "W_2", [1.6, 0.4], [0.3, 1.7], 4.0, times)


# -- Hopf-Cole ----------------------------------------------------------------------------

@given(spaces(max_n=8), seeds, st.floats(0.05, 2.0))
def test_hopf_cole_operator_structure(sp, seed, t):
    phi = np.random.default_rng(seed).normal(size=sp.n)
    M = hopf_cole_operator(sp, t, phi)
    np.testing.assert_allclose(sp.m @ M, 0.0, atol=1e-10 * (1 + np.abs(M).max()))
    off = M[~np.eye(sp.n, dtype=bool)]
    gap = max_edge_gap(sp, phi)
    if gap <= 2 * t:
        assert off.min() >= -1e-12
    elif gap > 2 * t * (1 + 1e-9):
        assert off.min() < 0


def test_hopf_cole_on_a_subsolution_conserves_mass(t2):
    hj, _ = solve_hj(t2, np.array([1.5, 0.5]), np.array([0.5, 1.5]), N=8)
    sol = hopf_cole_solve(t2, 1.0, hj, np.array([1.0, 2.0]))
    assert max_edge_gap(t2, hj.potentials) <= 2.0
    assert sol.mass_error <= 1e-12
    assert sol.bounds_hold


def test_hopf_cole_reports_loss_of_positivity():
    sp = path(4)
    phis = np.tile(np.array([0.0, 3.0, 0.0, 3.0]), (5, 1))
    with pytest.raises(HopfColeError, match="edge gap"):
        hopf_cole_solve(sp, 0.05, phis, np.array([1.0, 1e-3, 1.0, 1e-3]), steps=4)


def test_hopf_cole_rejects_bad_input(t2):
    with pytest.raises(ValueError):
        hopf_cole_solve(t2, 0.0, np.zeros((3, 2)), np.ones(2))
    with pytest.raises(ValueError):
        hopf_cole_solve(t2, 1.0, np.zeros((3, 2)), np.array([1.0, -1.0]))


def test_hopf_cole_witness_report(t2, t2_sg):
    rho, sigma = np.array([1.4, 0.6]), np.array([0.7, 1.3])
    hj, _ = solve_hj(t2, sigma, rho, N=8)
    W = we_distance(t2, rho, sigma, N=8, restarts=0)
    Wt = we_distance(t2, heat_apply(t2_sg, rho, 0.5), sigma, N=8, restarts=0)
    rep = evi_witness_from_hopf_cole(t2, t2_sg, 0.5, rho, sigma, hj, np.zeros(2), 0.0, W, Wt)
    assert rep.grid == ["eq40", "evi_integrated"]
    assert rep.extra["mass_error"] <= 1e-12
    assert all(math.isfinite(r) for r in rep.residuals)


# -- JKO -------------------------------------------------------------------------------------

def test_jko_entropy_is_nonincreasing(rng):
    sp = random_space(rng, 6)
    traj = jko_trajectory(sp, random_density(sp, rng), 0.05, 0.5)
    ent = traj.entropies(sp)
    assert np.all(np.diff(ent) <= 1e-13)
    assert not traj.flagged
    for rho in traj.densities:
        assert integrate(sp, rho) == pytest.approx(1.0, abs=1e-12)


def test_jko_step_minimizes_its_objective(t2):
    rho_k = np.array([1.8, 0.2])
    st_ = jko_step(t2, rho_k, 0.1)
    assert st_.objective <= st_.start_objective
    Q = metric_matrix(t2, rho_k)
    for eps in (1e-3, -1e-3):
        other = st_.density + eps * np.array([2.0, -2.0])
        d = t2.m * (other - rho_k)
        val = entropy(t2, other) + 0.5 * d @ Q @ d / 0.1
        assert val >= st_.objective - 1e-12
    with pytest.raises(ValueError):
        jko_step(t2, rho_k, 0.0)
    with pytest.raises(ValueError):
        metric_matrix(t2, rho_k, "harmonic")


def test_jko_gap_shrinks_with_tau(t2, t2_sg):
    gaps = [jko_heat_gap(t2, t2_sg, [1.9, 0.1], tau, 0.5, "logmean") for tau in (0.1, 0.05)]
    assert gaps[1] < gaps[0]


def test_jko_logmean_is_first_order(t2, t2_sg):
    rep = jko_convergence_report(t2, t2_sg, [1.9, 0.1], [0.1, 0.05, 0.025], 0.5, "logmean")
    assert rep.passed, rep.extra["ratios"]


def test_jko_geodesic_metric_runs_on_tiny_spaces(t2):
    st_ = jko_step(t2, np.array([1.8, 0.2]), 0.1, metric="geodesic")
    assert st_.objective <= st_.start_objective
    with pytest.raises(ValueError):
        jko_step(path(7), np.ones(7), 0.1, metric="geodesic")


def test_jko_requires_commensurate_horizon(t2):
    with pytest.raises(ValueError):
        jko_trajectory(t2, [1.0, 1.0], 0.3, 0.5)


# -- functional inequalities ----------------------------------------------------------------

def test_two_point_poincare_constant(t2_sg):
    assert poincare_constant(t2_sg) == 0.25


@given(spaces(min_n=3, max_n=8), seeds)
def test_poincare_inequality_and_generalized_eigenvalue(sp, seed):
    sg = SpectralSemigroup.of(sp)
    lam = scipy.linalg.eigh(sp.stiffness, np.diag(sp.m), eigvals_only=True)
    assert poincare_constant(sg) == pytest.approx(1 / lam[1], rel=1e-9)
    f = np.random.default_rng(seed).normal(size=sp.n)
    var = integrate(sp, f * f) - integrate(sp, f) ** 2
    assert var <= poincare_constant(sg) * energy(sp, f) * (1 + 1e-9) + 1e-12


def test_functional_inequalities_on_two_point(t2, t2_sg, rng):
    rep = functional_inequalities(t2, t2_sg, 4.0, rng, pairs=5, varrho=0.1,
                                  be_samples=rng.normal(size=(3, 2)))
    assert rep.extra["c_P"] == 0.25
    assert rep.passed
    assert rep.extra["be_best_K"] == pytest.approx(4.0, abs=1e-6)


# -- entropy convexity -----------------------------------------------------------------------

def test_constant_geodesic_is_an_equality(t2):
    rho = np.array([1.3, 0.7])
    curve = CECurve.linear(t2, rho, rho, 4)
    rep = entropy_convexity_check(t2, curve, 1.0)
    np.testing.assert_allclose(rep.residuals, 0.0, atol=1e-15)


def test_entropy_convexity_along_a_geodesic(t2, t2_sg):
    r0, r1 = np.array([1.9, 0.1]), np.array([0.2, 1.8])
    curve, _ = geodesic(t2, r0, r1, N=6, restarts=0)
    W = we_distance(t2, r0, r1, N=6, restarts=0)
    rep = entropy_convexity_check(t2, curve, 0.0, W)
    assert rep.passed
    # without a distance lower bound the curvature term cannot bite
    assert entropy_convexity_check(t2, curve, 500.0).passed
    big = entropy_convexity_check(t2, curve, 500.0, W)
    assert not big.passed
    heat = entropy_convexity_check(t2, curve, 0.0, sg=t2_sg, t=0.1)
    assert heat.extra["eps2"] >= 0


def test_two_point_talagrand_constant_closed_form(rng):
    # mu = (2, 0) against m: half the mass crosses a unit-speed edge, so W = 1/2
    # and the empirical constant 2 Ent / W^2 is 8 log 2
    sp = two_point()
    sg = SpectralSemigroup.of(sp)
    rep = functional_inequalities(sp, sg, 1.0, rng, pairs=0, samples=[[2.0, 0.0]])
    tal = rep.extra["talagrand"][0]
    assert tal["ent"] == pytest.approx(math.log(2), abs=1e-12)
    assert tal["W_lower"] <= 0.5 + 1e-9 <= tal["W_upper"] + 2e-9
    assert tal["W_upper"] == pytest.approx(0.5, abs=1e-3)
    assert rep.extra["talagrand_constant"] == pytest.approx(8 * math.log(2), rel=1e-2)


def test_functional_inequalities_at_equilibrium_vanish(rng):
    sp = two_point()
    rep = functional_inequalities(sp, SpectralSemigroup.of(sp), 1.0, rng, pairs=0,
                                  samples=[[1.0, 1.0]])
    tal = rep.extra["talagrand"][0]
    assert tal["ent"] == 0.0 and tal["W_upper"] == 0.0
    assert rep.residuals == [0.0]
