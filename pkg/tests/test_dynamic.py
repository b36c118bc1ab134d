import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmlab.builders import path, two_point
from mmlab.dynamic import (CECurve, HJSubsolution, WeightedFormOperator, _SparseHJ,
                           certified_action, curve_speed, dumps_curve, geodesic,
                           heat_curve_speed_bound, midpoint_action, sandwich_check,
                           solve_hj, speed_squared, we_distance, we_dual, we_dual_l1)
from mmlab.heat import fisher
from mmlab.space import FiniteEnergySpace, gamma, random_density, random_space

seeds = st.integers(0, 2**31 - 1)


def t2_density(a):
    return np.array([1.0 + a, 1.0 - a])


# On the two-point space the arithmetic-mean weight is (rho_1 + rho_2)/2 = 1 for
# every density, so the metric is flat and W_E((1+a, 1-a), (1+b, 1-b)) = |a - b| / 2.

@settings(max_examples=15)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_two_point_dynamic_distance_closed_form(a, b):
    t2 = two_point()
    iv = we_distance(t2, t2_density(a), t2_density(b), N=6, restarts=0)
    exact = abs(a - b) / 2
    assert iv.lower - 1e-9 <= exact <= iv.upper + 1e-9
    assert iv.upper - exact <= 1e-6


def test_two_point_extremes(t2):
    r0, r1 = t2_density(1.0), t2_density(-1.0)
    iv = we_distance(t2, r0, r1)
    assert 1 - 1e-3 <= iv.lower <= iv.upper <= 1 + 1e-3
    assert we_dual(t2, r0, r1).lower >= 1 - 2e-3
    l1 = we_dual_l1(t2, r0, r1)
    assert l1.lower == pytest.approx(1.0, abs=1e-8) and l1.width < 1e-8


def test_dual_value_does_not_depend_on_the_time_horizon(t2):
    r0, r1 = t2_density(0.8), t2_density(-0.6)
    a = we_dual(t2, r0, r1, N=8, delta=1.0).lower
    b = we_dual(t2, r0, r1, N=8, delta=0.3).lower
    assert a == pytest.approx(b, abs=1e-6)


def test_weighted_operator_quadratic_form(rng):
    sp = random_space(rng, 6)
    rho = random_density(sp, rng, floor=0.1)
    f = rng.normal(size=sp.n)
    L = WeightedFormOperator(sp, rho)
    assert L.quadratic(f) == pytest.approx(float(sp.m @ (rho * gamma(sp, f))), rel=1e-12)
    x = L.matrix @ f
    val, p = L.inverse_quadratic(x)
    assert val == pytest.approx(L.quadratic(f), rel=1e-9)
    # a rate creating mass cannot be carried
    assert L.inverse_quadratic(np.ones(sp.n))[0] == math.inf


def test_speed_is_dual_to_the_weighted_form(rng):
    sp = random_space(rng, 5)
    rho = random_density(sp, rng, floor=0.2)
    rate = rng.normal(size=sp.n)
    rate -= rate.mean()
    v2 = speed_squared(sp, rho, rate)
    # sup_f (2 <rate, f> - int rho Gamma(f)) = speed^2 by Cauchy-Schwarz
    L = WeightedFormOperator(sp, rho)
    for _ in range(20):
        f = rng.normal(size=sp.n)
        assert 2 * rate @ f - L.quadratic(f) <= v2 + 1e-10


def test_certified_action_dominates_midpoint_rule(rng):
    sp = random_space(rng, 5)
    r0, r1 = random_density(sp, rng, 0.05), random_density(sp, rng, 0.05)
    curve = CECurve.linear(sp, r0, r1, 4)
    fine = certified_action(sp, curve, sub=64)
    assert certified_action(sp, curve, sub=4) >= fine - 1e-12
    assert midpoint_action(sp, curve) <= fine + 1e-12
    assert curve_speed(sp, curve, 0) >= 0
    with pytest.raises(IndexError):
        curve_speed(sp, curve, 4)


def test_curve_and_subsolution_json_round_trip(t2):
    curve = CECurve.linear(t2, t2_density(0.5), t2_density(-0.5), 4)
    back = CECurve.from_json(json.loads(dumps_curve(curve)))
    np.testing.assert_array_equal(back.masses, curve.masses)
    hj, _ = solve_hj(t2, t2_density(0.5), t2_density(-0.5), N=4)
    back = HJSubsolution.from_json(json.loads(json.dumps(hj.to_json())))
    np.testing.assert_array_equal(back.potentials, hj.potentials)


@pytest.mark.parametrize("seed", range(4))
def test_hj_subsolutions_are_feasible_and_weakly_dual(seed):
    rng = np.random.default_rng(seed)
    sp = random_space(rng, int(rng.integers(3, 7)))
    r0, r1 = random_density(sp, rng), random_density(sp, rng)
    hj, converged = solve_hj(sp, r0, r1, N=6)
    assert converged
    assert hj.max_violation(sp) <= 1e-10
    _, action = geodesic(sp, r0, r1, N=6, restarts=0)
    assert hj.objective(sp, r0, r1) <= action + 1e-9


def test_barrier_and_augmented_lagrangian_agree(rng):
    sp = random_space(rng, 5)
    r0, r1 = random_density(sp, rng), random_density(sp, rng)
    a, _ = solve_hj(sp, r0, r1, N=6, method="barrier")
    b, _ = solve_hj(sp, r0, r1, N=6, method="auglag")
    assert a.objective(sp, r0, r1) == pytest.approx(b.objective(sp, r0, r1), abs=1e-4)
    with pytest.raises(ValueError):
        solve_hj(sp, r0, r1, method="simplex")


def test_sparse_hj_derivatives_match_finite_differences(rng):
    sp = random_space(rng, 5)
    prob = _SparseHJ(sp, 4, 1.0)
    x = rng.normal(size=5 * sp.n)
    J = prob.jacobian(x).toarray()
    h = 1e-6
    fd = np.column_stack([(prob.constraints(x + h * e) - prob.constraints(x - h * e)) / (2 * h)
                          for e in np.eye(x.size)])
    np.testing.assert_allclose(J, fd, atol=1e-6)
    u = rng.uniform(size=J.shape[0])
    H = prob.hessian_terms(u).toarray()
    fdH = np.column_stack([(prob.jacobian(x + h * e).T @ u - prob.jacobian(x - h * e).T @ u)
                           / (2 * h) for e in np.eye(x.size)])
    np.testing.assert_allclose(H, fdH, atol=1e-6)


def test_disconnected_masses_give_infinite_distance():
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = w[2, 3] = w[3, 2] = 1.0
    sp = FiniteEnergySpace(np.ones(4), w)
    r0 = np.array([4.0, 0.0, 0.0, 0.0])
    r1 = np.array([0.0, 0.0, 4.0, 0.0])
    assert we_distance(sp, r0, r1).lower == math.inf
    assert we_dual(sp, r0, r1).lower == math.inf
    assert we_dual_l1(sp, r0, r1).lower == math.inf
    balanced = we_distance(sp, np.array([2.0, 0.0, 2.0, 0.0]), np.array([0.0, 2.0, 0.0, 2.0]),
                           N=4, restarts=0)
    assert math.isfinite(balanced.upper)


def test_identical_endpoints_have_zero_distance(rng):
    sp = random_space(rng, 4)
    rho = random_density(sp, rng)
    iv = we_distance(sp, rho, rho)
    assert iv.lower == iv.upper == 0.0


def test_sandwich_upper_half_holds_on_a_path(rng):
    sp = path(5)
    rep = sandwich_check(sp, random_density(sp, rng), random_density(sp, rng), restarts=0)
    assert rep.residuals[1] <= 2e-3
    assert rep.extra["W_Estar_lower"] <= rep.extra["W_E_upper"] + 2e-3


def test_heat_curve_speed_is_bounded_by_fisher(t2, t2_sg):
    rep = heat_curve_speed_bound(t2, t2_sg, t2_density(0.9), np.linspace(0.05, 0.5, 10))
    assert rep.passed
    # on the flat two-point metric the speed^2 of the heat curve is F-like but smaller
    assert max(rep.extra["speed_sq"]) <= fisher(t2, t2_density(0.9))


def _tree_flux_speed(sp, rho, x):
    """Exact ``x' L_rho^+ x`` on a path: the flux over edge ``(i, i+1)`` is a prefix sum."""
    i = np.arange(sp.n - 1)
    c = sp.w[i, i + 1] * 0.5 * (rho[:-1] + rho[1:])
    return float(np.sum(np.cumsum(x)[:-1] ** 2 / c))


@pytest.mark.parametrize("mean,std", [(1.5, 0.6), (-2.0, 0.5), (0.0, 1.0)])
def test_speed_matches_tree_flux_on_light_tails(mean, std):
    from mmlab.builders import ou_grid
    from mmlab.studies import gaussian_density

    sp = ou_grid(4.0, 0.25)
    mu = gaussian_density(sp, mean, std)
    rate = sp.m * (np.ones(sp.n) - mu)
    for s in (0.0, 1e-6, 0.3, 1.0):
        rho = (1 - s) * mu + s
        got = speed_squared(sp, rho, rate)
        assert got == pytest.approx(_tree_flux_speed(sp, rho, rate), rel=1e-9)


def test_graded_trapezoid_tightens_but_stays_above_exact_action():
    from mmlab.builders import ou_grid
    from mmlab.studies import gaussian_density

    sp = ou_grid(4.0, 0.25)
    mu = gaussian_density(sp, 1.5, 0.6)
    curve = CECurve.linear(sp, mu, np.ones(sp.n), 2)
    i = np.arange(sp.n - 1)
    # exact action of an affine density on a path: int_0^1 J^2 / c(s) ds per edge
    total = 0.0
    for k in range(curve.N):
        a, b = curve.masses[k] / sp.m, curve.masses[k + 1] / sp.m
        J = np.cumsum((curve.masses[k + 1] - curve.masses[k]) * curve.N)[:-1]
        c0 = sp.w[i, i + 1] * 0.5 * (a[:-1] + a[1:])
        c1 = sp.w[i, i + 1] * 0.5 * (b[:-1] + b[1:])
        total += np.sum(J ** 2 * np.log(c1 / c0) / (c1 - c0)) / curve.N
    graded = certified_action(sp, curve)
    uniform = certified_action(sp, curve, max_depth=0)
    assert total <= graded <= 1.05 * total
    assert graded < uniform
