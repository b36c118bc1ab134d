"""Dynamic distances built from the Dirichlet form.

Curve speeds come from the continuity inequality: for a mass rate ``x`` at
density ``rho`` the least admissible speed satisfies ``|rho'|^2 = x' L_rho^+ x``
where ``L_rho`` is the graph Laplacian with edge weights
``w_ij (rho_i + rho_j) / 2`` (so ``f' L_rho f = int Gamma(f) rho dm``).

``we_distance`` returns upper bounds for ``W_E`` from explicit curves;
``we_dual`` returns lower bounds for ``W_{E,*}`` from discrete Hamilton-Jacobi
subsolutions that stay admissible after piecewise-linear interpolation.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.optimize import minimize
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .barrier import BarrierSettings, maximize_over_gamma_ball
from .certify import CertifiedInterval
from .heat import SpectralSemigroup, fisher, heat_apply
from .intrinsic import intrinsic_distance_matrix
from .io import to_jsonable
from .report import Report
from .space import FiniteEnergySpace, check_density, gamma
from .transport import ExtendedDistanceMatrix, kantorovich

log = logging.getLogger(__name__)

SOLVER_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class WeightedFormOperator:
    """``L_rho`` with ``f' L_rho f = sum_i m_i rho_i Gamma(f)_i``."""

    space: FiniteEnergySpace
    rho: np.ndarray

    @property
    def edge_weights(self) -> np.ndarray:
        r = np.asarray(self.rho, dtype=float)
        return self.space.w * 0.5 * (r[:, None] + r[None, :])

    @property
    def matrix(self) -> np.ndarray:
        wt = self.edge_weights
        return np.diag(wt.sum(axis=1)) - wt

    def quadratic(self, f) -> float:
        f = np.asarray(f, dtype=float)
        return float(f @ self.matrix @ f)

    def inverse_quadratic(self, x) -> tuple[float, np.ndarray | None]:
        """``(x' L^+ x, L^+ x)``; ``(inf, None)`` when ``x`` leaves the range.

        The kernel of ``L`` is spanned by indicators of the components of the
        positive-conductance graph, so ``x`` is in range iff it sums to zero on
        each. A component sum counts only above both a relative (1e-9) and an
        absolute (1e-12) floor, the latter absorbing cancellation in rates
        formed as differences of unit-scale masses. The solve grounds one node
        per component and uses a Cholesky factorization, which stays accurate
        when conductances span many orders of magnitude (where an eigenvalue
        cutoff would misclassify small eigenvalues as kernel).
        """
        x = np.asarray(x, dtype=float)
        wt = self.edge_weights
        L = np.diag(wt.sum(axis=1)) - wt
        ncomp, labels = connected_components(sparse.csr_matrix(wt > 0), directed=False)
        sums = np.bincount(labels, weights=x, minlength=ncomp)
        kern = np.abs(sums).sum()
        if kern > 1e-9 * (np.abs(x).sum() + 1e-300) and kern > 1e-12:
            return math.inf, None
        p = np.zeros_like(x)
        value = 0.0
        for c in range(ncomp):
            idx = np.flatnonzero(labels == c)
            if idx.size == 1:
                continue
            # eliminate light nodes first and ground the heaviest one, so pivots
            # never cancel a large conductance against itself
            idx = idx[np.argsort(np.diag(L)[idx], kind="stable")]
            xc = x[idx] - sums[c] / idx.size
            Lc = L[np.ix_(idx, idx)]
            try:
                sol = scipy.linalg.cho_solve(scipy.linalg.cho_factor(Lc[:-1, :-1]), xc[:-1])
                pc = np.append(sol, 0.0)
            except np.linalg.LinAlgError:
                pc = scipy.linalg.pinvh(Lc) @ xc
            p[idx] = pc - pc.mean()
            value += float(xc @ pc)
        return max(value, 0.0), p


def speed_squared(sp: FiniteEnergySpace, rho, rate) -> float:
    """Squared metric speed of a mass rate ``rate`` at density ``rho``."""
    return WeightedFormOperator(sp, np.asarray(rho, float)).inverse_quadratic(rate)[0]


@dataclass
class CECurve:
    """Mass vectors ``sigma_k = m * rho_k`` on a uniform grid of ``[0, 1]``."""

    masses: np.ndarray  # (N + 1, n)

    @property
    def N(self) -> int:
        return self.masses.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    def densities(self, sp: FiniteEnergySpace) -> np.ndarray:
        return self.masses / sp.m[None, :]

    @classmethod
    def linear(cls, sp: FiniteEnergySpace, rho0, rho1, N: int) -> "CECurve":
        s = np.linspace(0.0, 1.0, N + 1)[:, None]
        return cls((1 - s) * (sp.m * rho0)[None, :] + s * (sp.m * rho1)[None, :])

    def to_json(self) -> dict:
        return to_jsonable({"grid": self.times, "slices": self.masses})

    @classmethod
    def from_json(cls, data: dict) -> "CECurve":
        return cls(np.asarray(data["slices"], dtype=float))


def curve_speed(sp: FiniteEnergySpace, curve: CECurve, k: int) -> float:
    """Squared speed on step ``k`` with the midpoint density.

    Returns ``inf`` if the mass rate cannot be carried by the edges that have
    positive density weight (e.g. mass created on an isolated empty node).
    """
    if not 0 <= k < curve.N:
        raise IndexError(f"step {k} out of range")
    dt = 1.0 / curve.N
    rate = (curve.masses[k + 1] - curve.masses[k]) / dt
    if not np.any(rate):
        return 0.0
    rho_mid = 0.5 * (curve.masses[k] + curve.masses[k + 1]) / sp.m
    return speed_squared(sp, rho_mid, rate)


def midpoint_action(sp: FiniteEnergySpace, curve: CECurve) -> float:
    dt = 1.0 / curve.N
    return sum(curve_speed(sp, curve, k) for k in range(curve.N)) * dt


def certified_action(sp: FiniteEnergySpace, curve: CECurve, sub: int = 4,
                     ratio: float = 4.0, max_depth: int = 40) -> float:
    """Upper bound on the action of the piecewise-linear interpolant.

    Along a segment the density is affine in time and ``x' L(rho)^+ x`` is
    convex in ``rho``, so the trapezoid rule over *any* partition overestimates
    the exact segment action. Each segment starts from ``sub`` uniform pieces;
    a piece whose endpoint speeds differ by more than ``ratio`` is bisected
    (up to ``max_depth`` times), which grades the partition toward endpoints
    where the density nearly vanishes.
    """
    N = curve.N
    dt = 1.0 / N
    total = 0.0
    for k in range(N):
        a, b = curve.masses[k], curve.masses[k + 1]
        rate = (b - a) / dt
        if not np.any(rate):
            continue

        def speed(s, a=a, b=b, rate=rate):
            return speed_squared(sp, ((1 - s) * a + s * b) / sp.m, rate)

        knots = np.linspace(0.0, 1.0, sub + 1)
        vals = [speed(s) for s in knots]
        if any(math.isinf(v) for v in vals):
            return math.inf
        stack = [(knots[q], knots[q + 1], vals[q], vals[q + 1], 0) for q in range(sub)]
        seg = 0.0
        while stack:
            s0, s1, v0, v1, depth = stack.pop()
            if depth < max_depth and max(v0, v1) > ratio * max(min(v0, v1), 1e-300):
                sm = 0.5 * (s0 + s1)
                vm = speed(sm)
                if math.isinf(vm):
                    return math.inf
                stack += [(s0, sm, v0, vm, depth + 1), (sm, s1, vm, v1, depth + 1)]
            else:
                seg += 0.5 * (s1 - s0) * (v0 + v1)
        total += dt * seg
    return total


# -- geodesic solver ------------------------------------------------------------

class _ActionObjective:
    """Midpoint action as a function of per-component softmax logits."""

    def __init__(self, sp, sigma0, sigma1, N):
        self.sp = sp
        self.N = N
        self.sigma0, self.sigma1 = sigma0, sigma1
        self.labels = sp.components
        self.comp_mass = np.array([sigma0[self.labels == c].sum()
                                   for c in range(self.labels.max() + 1)])
        grounded = [int(np.flatnonzero(self.labels == c)[0])
                    for c in range(self.labels.max() + 1)]
        self.free = np.setdiff1d(np.arange(sp.n), grounded)

    def _solve(self, rho, x):
        """``(x' L_rho^+ x, L_rho^+ x)`` for ``x`` with zero mass per component.

        With the density floor ``L_rho`` is positive definite once one node per
        component is grounded, so a Cholesky solve replaces the eigensolver.
        """
        L = WeightedFormOperator(self.sp, rho).matrix[np.ix_(self.free, self.free)]
        p = np.zeros_like(x)
        p[self.free] = scipy.linalg.cho_solve(scipy.linalg.cho_factor(L), x[self.free])
        return float(x @ p), p

    def slices(self, z):
        Z = z.reshape(self.N - 1, self.sp.n)
        S = np.empty_like(Z)
        for c, mass in enumerate(self.comp_mass):
            idx = self.labels == c
            e = np.exp(Z[:, idx] - Z[:, idx].max(axis=1, keepdims=True))
            S[:, idx] = mass * e / e.sum(axis=1, keepdims=True)
        return S

    def curve(self, z) -> CECurve:
        return CECurve(np.vstack([self.sigma0, self.slices(z), self.sigma1]))

    def __call__(self, z):
        sp, N = self.sp, self.N
        S = self.slices(z)
        sig = np.vstack([self.sigma0, S, self.sigma1])
        dt = 1.0 / N
        grad_sig = np.zeros_like(sig)
        total = 0.0
        for k in range(N):
            delta = sig[k + 1] - sig[k]
            rho_mid = np.maximum(0.5 * (sig[k] + sig[k + 1]) / sp.m, SOLVER_FLOOR)
            try:
                val, p = self._solve(rho_mid, delta)
            except np.linalg.LinAlgError:
                return 1e30, np.zeros_like(z)
            total += val / dt
            g_rho = -gamma(sp, p) / (2.0 * dt)  # d/d sigma through rho_mid
            grad_sig[k + 1] += 2 * p / dt + g_rho
            grad_sig[k] += -2 * p / dt + g_rho
        G = grad_sig[1:-1]
        gz = np.empty_like(G)
        for c, mass in enumerate(self.comp_mass):
            idx = self.labels == c
            s = S[:, idx] / mass if mass > 0 else np.zeros_like(S[:, idx])
            g = G[:, idx]
            gz[:, idx] = mass * s * (g - (s * g).sum(axis=1, keepdims=True))
        return total, gz.ravel()


def we_distance(sp: FiniteEnergySpace, rho0, rho1, N: int = 8, restarts: int = 2,
                seed: int = 0, sub: int = 4, maxiter: int = 500) -> CertifiedInterval:
    """Upper bound on ``W_E`` from the best of several discrete geodesics.

    The lower bound is ``W_{E,*}`` from ``we_dual`` (``W_E >= W_{E,*}``).
    Certificates: ``upper_certificate`` is the ``CECurve``; the lower one is
    the ``HJSubsolution``.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    rho0 = check_density(sp, rho0)
    rho1 = check_density(sp, rho1)
    sigma0, sigma1 = sp.m * rho0, sp.m * rho1
    labels = sp.components
    for c in range(labels.max() + 1):
        if abs(sigma0[labels == c].sum() - sigma1[labels == c].sum()) > 1e-12:
            return CertifiedInterval.infinite(note="component masses differ")
    if np.array_equal(rho0, rho1):
        curve = CECurve.linear(sp, rho0, rho1, N)
        return CertifiedInterval(0.0, 0.0, None, curve)
    upper_curve, _ = geodesic(sp, rho0, rho1, N, restarts, seed, sub, maxiter)
    upper = math.sqrt(certified_action(sp, upper_curve, sub))
    lower_iv = we_dual(sp, rho0, rho1, N)
    lower = min(lower_iv.lower, upper)
    return CertifiedInterval(lower, upper, lower_iv.lower_certificate, upper_curve,
                             flagged=lower_iv.flagged)


def geodesic(sp: FiniteEnergySpace, rho0, rho1, N: int = 8, restarts: int = 2,
             seed: int = 0, sub: int = 4, maxiter: int = 500) -> tuple[CECurve, float]:
    """Best curve found and its certified action (linear start + restarts)."""
    sigma0, sigma1 = sp.m * np.asarray(rho0, float), sp.m * np.asarray(rho1, float)
    lin = CECurve.linear(sp, rho0, rho1, N)
    best_curve, best_val = lin, certified_action(sp, lin, sub)
    obj = _ActionObjective(sp, sigma0, sigma1, N)
    rng = np.random.default_rng(seed)
    z_lin = np.log(np.maximum(lin.masses[1:-1], 1e-12)).ravel()
    starts = [z_lin] + [z_lin + rng.normal(scale=0.5, size=z_lin.size)
                        for _ in range(restarts)]
    for z0 in starts:
        res = minimize(obj, z0, jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "gtol": 1e-10, "ftol": 1e-14})
        curve = obj.curve(res.x)
        val = certified_action(sp, curve, sub)
        if val < best_val:
            best_curve, best_val = curve, val
    return best_curve, best_val


# -- Hamilton-Jacobi subsolutions -------------------------------------------------

@dataclass
class HJSubsolution:
    """Potentials ``phi_k`` on a uniform grid of ``[0, delta]``."""

    potentials: np.ndarray  # (N + 1, n)
    delta: float = 1.0

    @property
    def N(self) -> int:
        return self.potentials.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.delta, self.N + 1)

    def residuals(self, sp: FiniteEnergySpace) -> np.ndarray:
        """``(phi_{k+1} - phi_k)/dt + max(Gamma(phi_k), Gamma(phi_{k+1}))/2``.

        Gamma is recomputed from the edge list, independently of the solver.
        """
        P = self.potentials
        dt = self.delta / self.N
        i, j = np.nonzero(sp.w)
        G = np.zeros_like(P)
        for k in range(self.N + 1):
            diff2 = (P[k, i] - P[k, j]) ** 2
            np.add.at(G[k], i, sp.w[i, j] * diff2)
        G /= 2.0 * sp.m[None, :]
        return (P[1:] - P[:-1]) / dt + 0.5 * np.maximum(G[:-1], G[1:])

    def max_violation(self, sp: FiniteEnergySpace) -> float:
        return float(self.residuals(sp).max())

    def objective(self, sp: FiniteEnergySpace, rho0, rho1) -> float:
        """``2 delta int (phi_delta rho1 - phi_0 rho0) dm``."""
        P = self.potentials
        return 2.0 * self.delta * float(sp.m @ (P[-1] * rho1 - P[0] * rho0))

    def to_json(self) -> dict:
        return to_jsonable({"grid": self.times, "slices": self.potentials,
                            "delta": self.delta})

    @classmethod
    def from_json(cls, data: dict) -> "HJSubsolution":
        return cls(np.asarray(data["slices"], dtype=float), float(data.get("delta", 1.0)))


class _HJProblem:
    def __init__(self, sp, rho0, rho1, N, delta):
        self.sp, self.N, self.delta = sp, N, delta
        self.dt = delta / N
        self.c0 = sp.m * rho0
        self.c1 = sp.m * rho1
        i, j = np.nonzero(np.triu(sp.w))
        self.ei, self.ej, self.we = i, j, sp.w[i, j]

    def gamma_all(self, P):
        d = P[:, self.ei] - P[:, self.ej]
        G = np.zeros_like(P)
        np.add.at(G.T, self.ei, (self.we * d * d).T)
        np.add.at(G.T, self.ej, (self.we * d * d).T)
        return G / (2.0 * self.sp.m[None, :]), d

    def gamma_grad_apply(self, d, Y):
        """``sum_i Y_i dGamma_i/dphi`` for each time slice."""
        m = self.sp.m
        coef = self.we * d * (Y[:, self.ei] / m[self.ei] + Y[:, self.ej] / m[self.ej])
        out = np.zeros_like(Y)
        np.add.at(out.T, self.ei, coef.T)
        np.add.at(out.T, self.ej, -coef.T)
        return out

    def constraints(self, P):
        G, d = self.gamma_all(P)
        slope = (P[1:] - P[:-1]) / self.dt
        return slope + 0.5 * G[:-1], slope + 0.5 * G[1:], d

    def objective(self, P):
        return 2.0 * self.delta * (P[-1] @ self.c1 - P[0] @ self.c0)

    def lagrangian(self, x, lam_a, lam_b, mu):
        n, N = self.sp.n, self.N
        P = x.reshape(N + 1, n)
        ca, cb, d = self.constraints(P)
        val = -self.objective(P)
        grad = np.zeros_like(P)
        grad[-1] -= 2.0 * self.delta * self.c1
        grad[0] += 2.0 * self.delta * self.c0
        ya = np.maximum(0.0, lam_a + mu * ca)
        yb = np.maximum(0.0, lam_b + mu * cb)
        val += (np.sum(ya ** 2) - np.sum(lam_a ** 2) + np.sum(yb ** 2) - np.sum(lam_b ** 2)) / (2 * mu)
        # d/dP of sum y * c
        for y, off in ((ya, 0), (yb, 1)):
            grad[1:] += y / self.dt
            grad[:-1] -= y / self.dt
            Yfull = np.zeros_like(P)
            Yfull[off:off + N] = 0.5 * y
            grad += self.gamma_grad_apply(d, Yfull)
        return val, grad.ravel()


def _restore(P: np.ndarray, residuals: np.ndarray, dt: float, margin: float = 1e-12):
    """Shift all slopes down uniformly so every constraint holds exactly."""
    c = max(0.0, float(residuals.max())) + margin
    k = np.arange(P.shape[0])[:, None]
    return P - c * dt * k, c


def _solve_hj_auglag(sp, rho0, rho1, N, delta, outer: int = 30, inner: int = 400,
                     mu0: float = 10.0, tol: float = 1e-9) -> tuple[np.ndarray, bool]:
    """Augmented-Lagrangian ascent (first-order; adequate for small ``n``)."""
    prob = _HJProblem(sp, rho0, rho1, N, delta)
    n = sp.n
    # warm start: linear-in-time potential from the L1 dual witness
    x = np.zeros((N + 1) * n)
    lam_a = np.zeros((N, n))
    lam_b = np.zeros((N, n))
    mu = mu0
    prev_viol = math.inf
    converged = False
    for _ in range(outer):
        res = minimize(prob.lagrangian, x, args=(lam_a, lam_b, mu), jac=True,
                       method="L-BFGS-B",
                       options={"maxiter": inner, "gtol": 1e-11, "ftol": 1e-15})
        x = res.x
        P = x.reshape(N + 1, n)
        ca, cb, _ = prob.constraints(P)
        lam_a = np.maximum(0.0, lam_a + mu * ca)
        lam_b = np.maximum(0.0, lam_b + mu * cb)
        viol = max(float(ca.max()), float(cb.max()), 0.0)
        comp = max(float(np.abs(lam_a * ca).max()), float(np.abs(lam_b * cb).max()))
        if viol < tol and comp < tol:
            converged = True
            break
        if viol > 0.25 * prev_viol:
            mu *= 5.0
        prev_viol = viol
    return x.reshape(N + 1, n), converged


class _SparseHJ:
    """Constraint values, sparse Jacobians and curvature for the HJ program.

    Variables are the stacked slices ``phi_0..phi_N``. Constraint ``a_{k,i}``
    uses ``Gamma(phi_k)``, ``b_{k,i}`` uses ``Gamma(phi_{k+1})``.
    """

    def __init__(self, sp, N, delta):
        self.sp, self.N, self.n = sp, N, sp.n
        self.dt = delta / N
        i, j = np.nonzero(np.triu(sp.w))
        self.ei, self.ej, self.we = i, j, sp.w[i, j]

    def half_gamma(self, P):
        d = P[:, self.ei] - P[:, self.ej]
        G = np.zeros_like(P)
        np.add.at(G.T, self.ei, (self.we * d * d).T)
        np.add.at(G.T, self.ej, (self.we * d * d).T)
        return G / (4.0 * self.sp.m[None, :])

    def constraints(self, x):
        P = x.reshape(self.N + 1, self.n)
        slope = (P[1:] - P[:-1]) / self.dt
        G = self.half_gamma(P)
        return np.concatenate([(slope + G[:-1]).ravel(), (slope + G[1:]).ravel()])

    def jacobian(self, x):
        """Sparse Jacobian of all ``2 N n`` constraints (COO assembly)."""
        N, n, dt = self.N, self.n, self.dt
        m, i, j, w = self.sp.m, self.ei, self.ej, self.we
        P = x.reshape(N + 1, n)
        k = np.arange(N)
        node = np.arange(n)
        rows, cols, vals = [], [], []
        for off, slices in ((0, k), (N * n, k + 1)):
            r = off + (k[:, None] * n + node[None, :]).ravel()
            rows += [r, r]
            cols += [(k[:, None] * n + node[None, :]).ravel(),
                     ((k + 1)[:, None] * n + node[None, :]).ravel()]
            vals += [np.full(r.size, -1.0 / dt), np.full(r.size, 1.0 / dt)]
            d = P[slices][:, i] - P[slices][:, j]  # (N, E)
            ri = off + (k[:, None] * n + i[None, :])
            rj = off + (k[:, None] * n + j[None, :])
            ci = slices[:, None] * n + i[None, :]
            cj = slices[:, None] * n + j[None, :]
            gi = 0.5 * w * d / m[i]
            gj = 0.5 * w * d / m[j]
            rows += [ri.ravel(), ri.ravel(), rj.ravel(), rj.ravel()]
            cols += [ci.ravel(), cj.ravel(), cj.ravel(), ci.ravel()]
            vals += [gi.ravel(), -gi.ravel(), -gj.ravel(), gj.ravel()]
        return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows),
                                                         np.concatenate(cols))),
                                 shape=(2 * N * n, (N + 1) * n))

    def hessian_terms(self, u):
        """Block-diagonal ``sum u_c Hess(c)``; each block is a weighted Laplacian."""
        N, n = self.N, self.n
        m, i, j = self.sp.m, self.ei, self.ej
        Y = np.zeros((N + 1, n))
        Y[:-1] += u[:N * n].reshape(N, n)
        Y[1:] += u[N * n:].reshape(N, n)
        c = 0.5 * self.we[None, :] * (Y[:, i] / m[i] + Y[:, j] / m[j])  # (N+1, E)
        base = (np.arange(N + 1) * n)[:, None]
        I, J = (base + i[None, :]).ravel(), (base + j[None, :]).ravel()
        c = c.ravel()
        rows = np.concatenate([I, J, I, J])
        cols = np.concatenate([I, J, J, I])
        vals = np.concatenate([c, c, -c, -c])
        V = (N + 1) * n
        return sparse.csr_matrix((vals, (rows, cols)), shape=(V, V))


def _scaled_sparse_solve(H, g):
    """Jacobi-scaled sparse solve with a dense least-squares fallback."""
    d = 1.0 / np.sqrt(H.diagonal())
    Dm = sparse.diags(d)
    A = (Dm @ H @ Dm).tocsc()
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            x = spsolve(A, g * d)
            if np.all(np.isfinite(x)):
                return d * x
        except (MatrixRankWarning, RuntimeError):
            pass
    x = np.linalg.lstsq(A.toarray(), g * d, rcond=1e-15)[0]
    return d * x


def _solve_hj_barrier(sp, rho0, rho1, N, delta, tol: float = 1e-9,
                      max_newton: int = 100, max_outer: int = 30,
                      factor: float = 10.0) -> tuple[np.ndarray, bool]:
    """Log-barrier Newton on the (convex) discrete HJ program.

    Starts from the strictly feasible ``phi_k = -t_k``; one node per
    conductance component of ``phi_0`` is pinned to remove the constant
    direction. Stops when the barrier gap ``#constraints / t`` falls below
    ``tol (1 + |objective|)``.
    """
    prob = _SparseHJ(sp, N, delta)
    n = sp.n
    V = (N + 1) * n
    c = np.zeros(V)
    c[N * n:] = 2.0 * delta * sp.m * rho1
    c[:n] -= 2.0 * delta * sp.m * rho0
    labels = sp.components
    pinned = np.array([int(np.flatnonzero(labels == k)[0]) for k in range(labels.max() + 1)])
    free = np.setdiff1d(np.arange(V), pinned)
    x = np.repeat(-np.linspace(0.0, delta, N + 1), n)
    ncons = 2 * N * n
    t = 1.0
    converged = False
    for _ in range(max_outer):
        for _ in range(max_newton):
            g = prob.constraints(x)
            u = 1.0 / (-g)
            J = prob.jacobian(x)
            grad = -t * c + J.T @ u
            H = (J.T @ sparse.diags(u * u) @ J + prob.hessian_terms(u)).tocsc()
            step_f = -_scaled_sparse_solve(H[free][:, free], grad[free])
            if not np.all(np.isfinite(step_f)):
                break
            step = np.zeros(V)
            step[free] = step_f
            dec2 = float(-grad @ step)
            if dec2 < 1e-10:
                break
            obj = -t * c @ x - np.log(-g).sum()
            a = 1.0
            while a > 1e-14:
                xn = x + a * step
                gn = prob.constraints(xn)
                if np.all(gn < 0):
                    objn = -t * c @ xn - np.log(-gn).sum()
                    if objn <= obj - 0.25 * a * dec2:
                        break
                a *= 0.5
            if a <= 1e-14:
                break
            x = xn
        value = float(c @ x)
        if ncons / t <= tol * (1.0 + abs(value)):
            converged = True
            break
        t *= factor
    return x.reshape(N + 1, n), converged


def solve_hj(sp: FiniteEnergySpace, rho0, rho1, N: int = 8, delta: float = 1.0,
             method: str = "barrier", **options) -> tuple[HJSubsolution, bool]:
    """Discrete HJ subsolution maximizing ``2 delta int (phi_N rho1 - phi_0 rho0) dm``.

    ``method`` is ``barrier`` (sparse log-barrier Newton, default) or
    ``auglag`` (augmented Lagrangian with L-BFGS inner solves). Either way the
    result is passed through a uniform slope shift so that every constraint
    holds exactly; the returned object is a certificate on its own.
    """
    if method == "barrier":
        P, converged = _solve_hj_barrier(sp, rho0, rho1, N, delta, **options)
    elif method == "auglag":
        P, converged = _solve_hj_auglag(sp, rho0, rho1, N, delta, **options)
    else:
        raise ValueError(f"unknown HJ method {method!r}")
    P, _ = _restore(P, HJSubsolution(P, delta).residuals(sp), delta / N)
    return HJSubsolution(P, delta), converged


def we_dual(sp: FiniteEnergySpace, rho0, rho1, N: int = 8, delta: float = 1.0,
            upper: float | None = None, **solver) -> CertifiedInterval:
    """Certified lower bound on ``W_{E,*}`` from a discrete HJ subsolution.

    ``upper`` (e.g. a ``W_E`` upper bound) is reported as the upper side;
    otherwise the upper side is ``inf``.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    rho0 = check_density(sp, rho0)
    rho1 = check_density(sp, rho1)
    labels = sp.components
    s0, s1 = sp.m * rho0, sp.m * rho1
    for c in range(labels.max() + 1):
        if abs(s0[labels == c].sum() - s1[labels == c].sum()) > 1e-12:
            return CertifiedInterval.infinite(note="component masses differ")
    if np.array_equal(rho0, rho1):
        hj = HJSubsolution(np.zeros((N + 1, sp.n)), delta)
        return CertifiedInterval(0.0, 0.0 if upper is None else upper, hj, None)
    hj, converged = solve_hj(sp, rho0, rho1, N, delta, **solver)
    if hj.max_violation(sp) > 1e-10:
        raise RuntimeError("restored HJ subsolution is infeasible")
    val = max(hj.objective(sp, rho0, rho1), 0.0)
    lower = math.sqrt(val)
    up = math.inf if upper is None else max(upper, lower)
    return CertifiedInterval(lower, up, hj, None, flagged=not converged)


def we_dual_l1(sp: FiniteEnergySpace, rho0, rho1,
               settings: BarrierSettings | None = None) -> CertifiedInterval:
    """``sup { int phi (rho1 - rho0) dm : Gamma(phi) <= 1 }``."""
    rho0 = check_density(sp, rho0)
    rho1 = check_density(sp, rho1)
    if np.array_equal(rho0, rho1):
        return CertifiedInterval.exact(0.0, np.zeros(sp.n))
    return maximize_over_gamma_ball(sp, sp.m * (rho1 - rho0), settings or BarrierSettings())


# -- comparison reports ------------------------------------------------------------

def sandwich_check(sp: FiniteEnergySpace, rho0, rho1, N: int = 8, tol: float = 1e-3,
                   restarts: int = 2, seed: int = 0) -> Report:
    """Order ``W_{d_E} <= W_{E,*} <= W_E`` through certified bounds.

    Residuals are ``W_{d_E}^lo - W_{E,*}^lo`` and ``W_{E,*}^lo - W_E^up``;
    the check passes when both are at most ``tol``.
    """
    rho0 = check_density(sp, rho0)
    rho1 = check_density(sp, rho1)
    lo, up = intrinsic_distance_matrix(sp)
    mu0, mu1 = sp.m * rho0, sp.m * rho1
    wd_lo = kantorovich(ExtendedDistanceMatrix(lo, True, check_triangle=False),
                        mu0, mu1, 2).distance
    wd_up = kantorovich(ExtendedDistanceMatrix(up, True, check_triangle=False),
                        mu0, mu1, 2).distance
    wdual = we_dual(sp, rho0, rho1, N)
    if math.isinf(wdual.lower):
        we_up = math.inf
    else:
        curve, action = geodesic(sp, rho0, rho1, N, restarts, seed)
        we_up = math.sqrt(action)
    l1 = we_dual_l1(sp, rho0, rho1)
    if math.isinf(we_up) and math.isinf(wdual.lower):
        residuals = [0.0, 0.0]
    else:
        residuals = [wd_lo - wdual.lower, wdual.lower - we_up]
    return Report("sandwich", {"N": N}, ["dE_vs_dual", "dual_vs_WE"], residuals, tol,
                  extra={"W_dE_lower": wd_lo, "W_dE_upper": wd_up,
                         "W_Estar_lower": wdual.lower, "W_E_upper": we_up,
                         "W_Estar1_lower": l1.lower, "W_Estar1_upper": l1.upper})


def heat_curve_speed_bound(sp: FiniteEnergySpace, sg: SpectralSemigroup, rho0, tgrid,
                           tol: float = 0.0) -> Report:
    """Speed of the sampled heat curve against the Fisher information.

    Residual per step: ``speed^2 - F(rho_{t_mid})`` where the speed uses the
    secant mass rate and midpoint density.
    """
    rho0 = check_density(sp, rho0)
    tgrid = np.asarray(tgrid, dtype=float)
    rhos = [heat_apply(sg, rho0, t) for t in tgrid]
    residuals, speeds, fis = [], [], []
    for k in range(len(tgrid) - 1):
        dt = tgrid[k + 1] - tgrid[k]
        rate = sp.m * (rhos[k + 1] - rhos[k]) / dt
        mid = 0.5 * (rhos[k] + rhos[k + 1])
        v2 = speed_squared(sp, mid, rate) if np.any(rate) else 0.0
        f = fisher(sp, heat_apply(sg, rho0, 0.5 * (tgrid[k] + tgrid[k + 1])))
        residuals.append(v2 - f)
        speeds.append(v2)
        fis.append(f)
    mids = list(0.5 * (tgrid[:-1] + tgrid[1:]))
    return Report("heat_curve_speed", {}, mids, residuals, tol,
                  extra={"speed_sq": speeds, "fisher": fis})


def dumps_curve(curve: CECurve) -> str:
    return json.dumps(curve.to_json(), sort_keys=True)
