import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmlab.transport import (DistanceMatrixError, ExtendedDistanceMatrix, MarginalError,
                             glue_plans, hopf_lax, hopf_lax_duality_check, kantorovich,
                             lipschitz_constant, plan_cost, transportation_simplex,
                             triangle_violation, w1_dual)

from oracles import (lp_transport, random_extended_metric, random_marginal,
                     vertex_enumeration)

seeds = st.integers(0, 2**31 - 1)


@given(seeds, st.integers(2, 12), st.sampled_from([1, 2]))
def test_kantorovich_matches_linprog(seed, n, power):
    rng = np.random.default_rng(seed)
    d = random_extended_metric(rng, n)
    mu, nu = random_marginal(rng, n, sparse=True), random_marginal(rng, n, sparse=True)
    res = kantorovich(d, mu, nu, power)
    expected = lp_transport(d ** power, mu, nu)
    if math.isinf(expected):
        assert math.isinf(res.cost) and res.unbalanced_class is not None
    else:
        assert res.cost == pytest.approx(expected, abs=1e-9)
        assert res.gap <= 1e-8
        assert plan_cost(d, res.plan, power) == pytest.approx(res.cost, abs=1e-12)


@given(seeds, st.integers(2, 4))
def test_simplex_agrees_with_vertex_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    C = rng.uniform(0, 5, (n, n))
    a, b = random_marginal(rng, n), random_marginal(rng, n)
    X, u, v = transportation_simplex(C, a, b)
    assert float(np.sum(X * C)) == pytest.approx(vertex_enumeration(C, a, b), abs=1e-10)
    np.testing.assert_allclose(X.sum(axis=1), a, atol=1e-12)
    np.testing.assert_allclose(X.sum(axis=0), b, atol=1e-12)


@given(seeds, st.integers(2, 10))
def test_dual_potentials_are_feasible_and_complementary(seed, n):
    rng = np.random.default_rng(seed)
    d = random_extended_metric(rng, n, p_split=0.0)
    mu, nu = random_marginal(rng, n), random_marginal(rng, n)
    res = kantorovich(d, mu, nu, 2)
    slack = d ** 2 - (res.psi[None, :] - res.phi[:, None])
    assert slack.min() >= -1e-9
    assert np.abs(slack[res.plan > 1e-12]).max() <= 1e-9


def test_simplex_handles_degenerate_marginals():
    C = np.array([[1.0, 2.0], [3.0, 1.0]])
    X, _, _ = transportation_simplex(C, np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    np.testing.assert_allclose(X, np.diag([0.5, 0.5]))


def test_infinite_cost_detects_unbalanced_class():
    d = np.array([[0, 1, np.inf], [1, 0, np.inf], [np.inf, np.inf, 0]])
    res = kantorovich(d, [0.5, 0.5, 0.0], [0.25, 0.25, 0.5])
    assert res.cost == math.inf and res.distance == math.inf
    value, witness = w1_dual(d, [0.5, 0.5, 0.0], [0.25, 0.25, 0.5])
    assert value == math.inf
    assert witness @ (np.array([0.5, 0.5, 0.0]) - np.array([0.25, 0.25, 0.5])) > 0


def test_two_point_transport_closed_form():
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    res = kantorovich(d, [1.0, 0.0], [0.0, 1.0], 2)
    assert res.cost == 1.0 and res.distance == 1.0
    res = kantorovich(d, [0.7, 0.3], [0.2, 0.8], 1)
    assert res.cost == pytest.approx(0.5)


@given(seeds, st.integers(2, 9))
def test_w1_dual_witness_is_lipschitz_and_optimal(seed, n):
    rng = np.random.default_rng(seed)
    d = random_extended_metric(rng, n)
    mu, nu = random_marginal(rng, n), random_marginal(rng, n)
    value, f = w1_dual(d, mu, nu)
    primal = kantorovich(d, mu, nu, 1).cost
    if math.isinf(primal):
        assert value == math.inf
    else:
        assert lipschitz_constant(d, f) <= 1 + 1e-9
        assert value == pytest.approx(primal, abs=1e-9)


@given(seeds, st.integers(2, 9))
def test_hopf_lax_duality_gap(seed, n):
    rng = np.random.default_rng(seed)
    d = random_extended_metric(rng, n, p_split=0.0)
    mu, nu = random_marginal(rng, n), random_marginal(rng, n)
    phis = [rng.normal(size=n) for _ in range(5)]
    rep = hopf_lax_duality_check(d, mu, nu, phis)
    assert rep.passed
    assert rep.residuals[-1] <= 1e-6


def test_hopf_lax_formula_against_definition(rng):
    d = random_extended_metric(rng, 6, p_split=0.0)
    phi = rng.normal(size=6)
    q = hopf_lax(d, phi, 0.7)
    for y in range(6):
        assert q[y] == pytest.approx(min(phi[x] + d[x, y] ** 2 / 1.4 for x in range(6)))
    assert np.all(q <= phi + 1e-15)


def test_glue_plans_composes_marginals(rng):
    n = 5
    d = random_extended_metric(rng, n, p_split=0.0)
    a, b, c = (random_marginal(rng, n) for _ in range(3))
    p1 = kantorovich(d, a, b, 1).plan
    p2 = kantorovich(d, b, c, 1).plan
    g = glue_plans(p1, p2)
    np.testing.assert_allclose(g.sum(axis=1), a, atol=1e-12)
    np.testing.assert_allclose(g.sum(axis=0), c, atol=1e-12)
    # gluing gives an admissible plan, so it costs at least the optimum
    assert plan_cost(d, g, 1) >= kantorovich(d, a, c, 1).cost - 1e-12
    with pytest.raises(MarginalError):
        glue_plans(p1, kantorovich(d, c, a, 1).plan)


@pytest.mark.parametrize("d, fragment", [
    ([[0, 1], [2, 0]], "d\\[0,1\\] != d\\[1,0\\]"),
    ([[0, -1], [-1, 0]], "negative"),
    ([[1, 1], [1, 0]], "must be zero"),
    ([[0, 0], [0, 0]], "semidistance"),
    ([[0, 1, 5], [1, 0, 1], [5, 1, 0]], "triangle"),
])
def test_distance_matrix_validation(d, fragment):
    with pytest.raises(DistanceMatrixError, match=fragment):
        ExtendedDistanceMatrix(np.array(d, dtype=float))


def test_distance_matrix_json_round_trip_with_infinity():
    d = ExtendedDistanceMatrix(np.array([[0, np.inf], [np.inf, 0]]))
    data = d.to_json()
    assert data["d"][0][1] == "inf"
    back = ExtendedDistanceMatrix.from_json(data)
    assert back.d[0, 1] == math.inf and not back.is_finite
    assert triangle_violation(d.d) == 0.0


@pytest.mark.parametrize("mu, nu", [([0.5, 0.6], [0.5, 0.5]), ([-0.1, 1.1], [0.5, 0.5]),
                                    ([1.0], [0.5, 0.5])])
def test_marginal_errors(mu, nu):
    with pytest.raises(MarginalError):
        kantorovich(np.array([[0.0, 1.0], [1.0, 0.0]]), mu, nu)
