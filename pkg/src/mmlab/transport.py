"""Optimal transport on finite sets with extended (possibly infinite) costs.

The primal problem is solved exactly by the transportation simplex
(northwest-corner start, MODI pricing, Bland's rule). Points at infinite
distance from each other never exchange mass, so each finite-distance class
is solved on its own; a class whose source and target masses differ makes the
whole transport cost infinite.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .io import distance_matrix_from_json, distance_matrix_to_json
from .report import Report

MASS_TOL = 1e-9


class MarginalError(ValueError):
    """Source and target masses are incompatible."""


class DistanceMatrixError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ExtendedDistanceMatrix:
    """Symmetric ``[0, inf]``-valued matrix satisfying the triangle inequality.

    With ``semidistance=True`` off-diagonal zeros are allowed.
    ``check_triangle=False`` skips the triangle test, for matrices of
    certified bounds that only satisfy it up to solver tolerance.
    """

    d: np.ndarray
    semidistance: bool = False
    check_triangle: bool = field(default=True, repr=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        n = d.shape[0]
        if d.ndim != 2 or d.shape != (n, n):
            raise DistanceMatrixError(f"distance matrix must be square, got {d.shape}")
        if np.isnan(d).any():
            raise DistanceMatrixError("distance matrix contains NaN")
        if (d < 0).any():
            i, j = np.argwhere(d < 0)[0]
            raise DistanceMatrixError(f"d[{i},{j}] = {d[i, j]} is negative")
        if (np.diag(d) != 0).any():
            i = int(np.flatnonzero(np.diag(d) != 0)[0])
            raise DistanceMatrixError(f"d[{i},{i}] = {d[i, i]} must be zero")
        if (d != d.T).any():
            i, j = np.argwhere(d != d.T)[0]
            raise DistanceMatrixError(f"d[{i},{j}] != d[{j},{i}]")
        if not self.semidistance:
            off = (d == 0) & ~np.eye(n, dtype=bool)
            if off.any():
                i, j = np.argwhere(off)[0]
                raise DistanceMatrixError(
                    f"d[{i},{j}] = 0 for distinct points; pass semidistance=True")
        viol = triangle_violation(d) if self.check_triangle else 0.0
        if viol > 1e-9:
            raise DistanceMatrixError(f"triangle inequality violated by {viol:.3e}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def classes(self) -> np.ndarray:
        """Label of the finite-distance equivalence class of each point."""
        _, labels = connected_components(np.isfinite(self.d), directed=False)
        return labels

    @property
    def is_finite(self) -> bool:
        return bool(np.isfinite(self.d).all())

    def scaled(self, lam: float) -> "ExtendedDistanceMatrix":
        return ExtendedDistanceMatrix(self.d * lam, self.semidistance)

    def to_json(self) -> dict:
        out = distance_matrix_to_json(self.d)
        out["semidistance"] = self.semidistance
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ExtendedDistanceMatrix":
        return cls(distance_matrix_from_json(data), bool(data.get("semidistance", False)))


def triangle_violation(d: np.ndarray) -> float:
    """Largest ``d_ik - d_ij - d_jk`` over finite right-hand sides (0 if none)."""
    d = np.asarray(d, dtype=float)
    worst = 0.0
    for j in range(d.shape[0]):
        rhs = d[:, j][:, None] + d[j, :][None, :]
        finite = np.isfinite(rhs)
        if not finite.any():
            continue
        diff = np.where(finite, d - np.where(finite, rhs, 0.0), -np.inf)
        # inf - finite on the left means an outright violation
        worst = max(worst, float(np.max(diff)))
    return worst


def _as_edm(d) -> ExtendedDistanceMatrix:
    if isinstance(d, ExtendedDistanceMatrix):
        return d
    return ExtendedDistanceMatrix(np.asarray(d, dtype=float), semidistance=True)


def _check_marginals(mu, nu, n: int) -> tuple[np.ndarray, np.ndarray]:
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    for name, v in (("mu", mu), ("nu", nu)):
        if v.shape != (n,):
            raise MarginalError(f"{name} has shape {v.shape}, expected ({n},)")
        if (v < 0).any():
            raise MarginalError(f"{name} has negative entries")
        if abs(v.sum() - 1.0) > MASS_TOL:
            raise MarginalError(f"{name} has total mass {v.sum()!r}, expected 1")
    return mu, nu


# -- transportation simplex ----------------------------------------------------

def _northwest_corner(a: np.ndarray, b: np.ndarray):
    r, c = a.size, b.size
    X = np.zeros((r, c))
    basis = []
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        X[i, j] = x
        basis.append((i, j))
        ra[i] -= x
        rb[j] -= x
        if i == r - 1 and j == c - 1:
            break
        if i == r - 1:
            j += 1
        elif j == c - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return X, basis


def _potentials(C: np.ndarray, basis) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``u_i + v_j = C_ij`` on the basis tree with ``u_0 = 0``."""
    r, c = C.shape
    adj = [[] for _ in range(r + c)]
    for i, j in basis:
        adj[i].append(r + j)
        adj[r + j].append(i)
    val = np.full(r + c, np.nan)
    val[0] = 0.0
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nb in adj[node]:
            if np.isnan(val[nb]):
                i, j = (node, nb - r) if node < r else (nb, node - r)
                val[nb] = C[i, j] - val[node]
                queue.append(nb)
    if np.isnan(val).any():
        raise RuntimeError("transportation basis is not a spanning tree")
    return val[:r], val[r:]


def _tree_path(basis, r: int, c: int, start: int, goal: int) -> list[int]:
    adj = [[] for _ in range(r + c)]
    for i, j in basis:
        adj[i].append(r + j)
        adj[r + j].append(i)
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nb in adj[node]:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path  # goal ... start


def transportation_simplex(C: np.ndarray, a: np.ndarray, b: np.ndarray,
                           max_iter: int | None = None):
    """Minimize ``<C, X>`` over ``X >= 0`` with row sums ``a``, column sums ``b``.

    Costs must be finite and ``a``, ``b`` strictly positive with equal sums.
    Returns ``(X, u, v)`` where ``u_i + v_j <= C_ij`` with equality on the
    final basis.
    """
    C = np.asarray(C, dtype=float)
    r, c = C.shape
    X, basis = _northwest_corner(a, b)
    tol = 1e-12 * max(1.0, float(np.abs(C).max()))
    max_iter = max_iter or 50 * r * c + 100
    for _ in range(max_iter):
        u, v = _potentials(C, basis)
        reduced = C - u[:, None] - v[None, :]
        neg = np.argwhere(reduced < -tol)
        if neg.size == 0:
            return X, u, v
        ei, ej = (int(x) for x in neg[0])  # Bland: lowest index enters
        path = _tree_path(basis, r, c, start=ei, goal=r + ej)
        # path runs col ej -> ... -> row ei; consecutive nodes are basic cells
        cells = []
        for p, q in zip(path[:-1], path[1:]):
            cells.append((q, p - r) if q < r else (p, q - r))
        minus = cells[0::2]
        plus = cells[1::2]
        theta = min(X[cell] for cell in minus)
        leaving = min(cell for cell in minus if X[cell] == theta)
        for cell in minus:
            X[cell] -= theta
        for cell in plus:
            X[cell] += theta
        X[ei, ej] += theta
        X[leaving] = 0.0
        basis.remove(leaving)
        basis.append((ei, ej))
    raise RuntimeError("transportation simplex did not converge")


# -- Kantorovich problem -------------------------------------------------------

@dataclass
class KantorovichResult:
    """Optimal cost ``sum pi_ij d_ij^power`` with plan and dual potentials.

    ``phi``/``psi`` satisfy ``psi_j - phi_i <= d_ij^power`` wherever the cost
    is finite, and ``dual_value = <psi, nu> - <phi, mu>``. For an infinite
    cost ``plan``/``phi``/``psi`` are ``None`` and ``unbalanced_class`` holds
    the indicator of a finite-distance class whose masses differ.
    """

    cost: float
    plan: np.ndarray | None
    phi: np.ndarray | None
    psi: np.ndarray | None
    dual_value: float
    power: int
    unbalanced_class: np.ndarray | None = None

    @property
    def distance(self) -> float:
        return self.cost ** (1.0 / self.power) if math.isfinite(self.cost) else math.inf

    @property
    def gap(self) -> float:
        if not math.isfinite(self.cost):
            return 0.0
        return abs(self.cost - self.dual_value)


def kantorovich(d, mu, nu, power: int = 2) -> KantorovichResult:
    """Optimal transport between mass vectors ``mu`` and ``nu``."""
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    d = _as_edm(d)
    n = d.n
    mu, nu = _check_marginals(mu, nu, n)
    labels = d.classes
    for k in range(labels.max() + 1):
        cls = labels == k
        if abs(mu[cls].sum() - nu[cls].sum()) > MASS_TOL:
            return KantorovichResult(math.inf, None, None, None, math.inf, power,
                                     unbalanced_class=cls.astype(float))
    cost_matrix = d.d ** power
    plan = np.zeros((n, n))
    phi = np.zeros(n)
    psi = np.zeros(n)
    for k in range(labels.max() + 1):
        idx = np.flatnonzero(labels == k)
        rows = idx[mu[idx] > 0]
        cols = idx[nu[idx] > 0]
        if rows.size == 0:
            continue
        a = mu[rows]
        b = nu[cols] * (a.sum() / nu[cols].sum())
        C = cost_matrix[np.ix_(rows, cols)]
        X, u, _ = transportation_simplex(C, a, b)
        plan[np.ix_(rows, cols)] = X
        phi[rows] = -u
        # one c-transform: tight and feasible against every supported row
        block = cost_matrix[np.ix_(rows, idx)]
        psi[idx] = np.min(phi[rows][:, None] + block, axis=0)
        rest = np.setdiff1d(idx, rows)
        if rest.size:
            phi[rest] = np.max(psi[idx][None, :] - cost_matrix[np.ix_(rest, idx)], axis=1)
    cost = float(np.sum(plan * np.where(plan > 0, cost_matrix, 0.0)))
    dual = float(psi @ nu - phi @ mu)
    return KantorovichResult(cost, plan, phi, psi, dual, power)


def w1_dual(d, mu, nu) -> tuple[float, np.ndarray]:
    """``sup { int f d(mu - nu) : f 1-Lipschitz }`` with an optimal witness.

    The witness is built from the power-1 Kantorovich potentials by one
    c-transform, which makes it 1-Lipschitz on every finite-distance class.
    For infinite values the witness is the indicator of an unbalanced class
    oriented so that scaling it drives the objective to ``+inf``.
    """
    d = _as_edm(d)
    res = kantorovich(d, mu, nu, power=1)
    mu, nu = np.asarray(mu, float), np.asarray(nu, float)
    if not math.isfinite(res.cost):
        cls = res.unbalanced_class
        sign = 1.0 if mu @ cls > nu @ cls else -1.0
        return math.inf, sign * cls
    labels = d.classes
    f = np.zeros(d.n)
    for k in range(labels.max() + 1):
        idx = np.flatnonzero(labels == k)
        sub = d.d[np.ix_(idx, idx)]
        phi_hat = np.max(res.psi[idx][None, :] - sub, axis=1)
        f[idx] = -phi_hat
    value = float(f @ (mu - nu))
    return value, f


def lipschitz_constant(d, f) -> float:
    """``max |f_i - f_j| / d_ij`` over distinct finite-distance pairs."""
    d = _as_edm(d).d
    f = np.asarray(f, dtype=float)
    mask = np.isfinite(d) & (d > 0)
    if not mask.any():
        return 0.0
    diff = np.abs(f[:, None] - f[None, :])
    return float(np.max(diff[mask] / d[mask]))


def hopf_lax(d, phi, t: float) -> np.ndarray:
    """``Q_t phi(y) = min_x phi(x) + d(x, y)^2 / (2t)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    d = _as_edm(d).d
    phi = np.asarray(phi, dtype=float)
    with np.errstate(invalid="ignore"):
        vals = phi[:, None] + d ** 2 / (2.0 * t)
    return np.min(vals, axis=0)


def hopf_lax_duality_check(d, mu, nu, phis=(), tol: float = 1e-8) -> Report:
    """``int Q_1 phi dnu - int phi dmu <= W^2/2`` for each sampled ``phi``.

    The last grid entry evaluates the Kantorovich dual potential, where the
    residual is the absolute gap to ``W^2/2``.
    """
    d = _as_edm(d)
    if not d.is_finite:
        raise ValueError("Hopf-Lax duality check needs a finite distance")
    mu, nu = _check_marginals(mu, nu, d.n)
    res = kantorovich(d, mu, nu, power=2)
    half_w2 = 0.5 * res.cost
    residuals, grid = [], []
    for k, phi in enumerate(phis):
        phi = np.asarray(phi, dtype=float)
        val = hopf_lax(d, phi, 1.0) @ nu - phi @ mu
        residuals.append(val - half_w2)
        grid.append(k)
    phi_lp = 0.5 * res.phi
    val_lp = hopf_lax(d, phi_lp, 1.0) @ nu - phi_lp @ mu
    residuals.append(abs(val_lp - half_w2))
    grid.append("lp_dual")
    return Report("hopf_lax_duality", {"n": d.n}, grid, residuals, tol,
                  extra={"half_w2": half_w2, "dual_at_lp": float(val_lp)})


def glue_plans(pi1, pi2, tol: float = MASS_TOL) -> np.ndarray:
    """Compose plans from ``mu`` to ``nu`` and from ``nu`` to ``lam``."""
    pi1 = np.asarray(pi1, dtype=float)
    pi2 = np.asarray(pi2, dtype=float)
    nu1 = pi1.sum(axis=0)
    nu2 = pi2.sum(axis=1)
    if nu1.shape != nu2.shape or np.abs(nu1 - nu2).max() > tol:
        raise MarginalError("middle marginals of the two plans differ")
    nu = 0.5 * (nu1 + nu2)
    inv = np.divide(1.0, nu, out=np.zeros_like(nu), where=nu > 0)
    return (pi1 * inv[None, :]) @ pi2


def plan_cost(d, plan, power: int = 2) -> float:
    d = _as_edm(d).d
    plan = np.asarray(plan, dtype=float)
    used = plan > 0
    if np.isinf(d[used]).any():
        return math.inf
    return float(np.sum(plan[used] * d[used] ** power))
