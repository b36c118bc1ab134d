"""Independent reference computations used by the tests."""

import itertools
import math

import numpy as np
from scipy.optimize import linprog
from scipy.sparse.csgraph import shortest_path


def random_extended_metric(rng, n, p_edge=0.4, p_split=0.3):
    """Shortest-path metric of a random weighted graph; disconnected pairs are inf."""
    mask = np.triu(rng.uniform(size=(n, n)) < p_edge, 1)
    w = np.where(mask, rng.uniform(0.1, 3.0, (n, n)), 0.0)
    if rng.uniform() > p_split:
        perm = rng.permutation(n)
        for a, b in zip(perm[:-1], perm[1:]):
            i, j = min(a, b), max(a, b)
            w[i, j] = w[i, j] or rng.uniform(0.1, 3.0)
    w = w + w.T
    d = shortest_path(w, directed=False)
    return np.minimum(d, d.T)  # Dijkstra can differ from its transpose in the last ulp


def random_marginal(rng, n, sparse=False):
    x = rng.dirichlet(np.ones(n))
    if sparse:
        x[rng.uniform(size=n) < 0.3] = 0.0
        if x.sum() == 0:
            x[rng.integers(n)] = 1.0
        x /= x.sum()
    return x


def lp_transport(cost, mu, nu):
    """Optimal cost via ``linprog``; ``inf`` when infeasible over finite cells."""
    n, k = cost.shape
    finite = np.isfinite(cost)
    idx = np.argwhere(finite)
    A = np.zeros((n + k, len(idx)))
    for col, (i, j) in enumerate(idx):
        A[i, col] = 1.0
        A[n + j, col] = 1.0
    res = linprog(cost[finite], A_eq=A, b_eq=np.concatenate([mu, nu]), bounds=(0, None),
                  method="highs")
    return res.fun if res.status == 0 else math.inf


def vertex_enumeration(cost, mu, nu):
    """Minimum over all basic feasible plans (tiny instances only).

    Every vertex of the transportation polytope extends to a basis of
    ``n + k - 1`` cells; the redundant last column constraint is dropped so each
    candidate basis is a square solve.
    """
    n, k = cost.shape
    cells = [(i, j) for i in range(n) for j in range(k) if np.isfinite(cost[i, j])]
    size = n + k - 1
    b = np.concatenate([mu, nu])[:-1]
    best = math.inf
    for basis in itertools.combinations(cells, size):
        A = np.zeros((n + k, size))
        for col, (i, j) in enumerate(basis):
            A[i, col] = 1.0
            A[n + j, col] = 1.0
        A = A[:-1]
        if abs(np.linalg.det(A)) < 0.5:  # incidence matrices are unimodular
            continue
        x = np.linalg.solve(A, b)
        if x.min() >= -1e-12:
            best = min(best, float(sum(x[c] * cost[i, j] for c, (i, j) in enumerate(basis))))
    return best


def cvxpy_gamma_ball(sp, c):
    """``max c.f  s.t.  Gamma(f) <= 1`` with a generic conic solver."""
    import cvxpy as cp

    f = cp.Variable(sp.n)
    cons = [f[0] == 0]
    for i in range(sp.n):
        nb = np.flatnonzero(sp.w[i])
        if nb.size:
            expr = cp.multiply(np.sqrt(sp.w[i, nb] / (2 * sp.m[i])), f[i] - f[nb])
            cons.append(cp.sum_squares(expr) <= 1)
    prob = cp.Problem(cp.Maximize(c @ f), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value
