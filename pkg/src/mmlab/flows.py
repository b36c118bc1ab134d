"""Checkers around gradient flows of the entropy.

All distance inputs are ``CertifiedInterval`` oracles. Residuals are signed
(positive = violation) and are built in the *certified-violation* direction:
a positive residual cannot be explained by the width of the enclosures. The
opposite, pessimistic residual is stored in ``extra`` so a reader can see
whether a pass also holds with the unfavourable bound.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import xlogy

from .certify import CertifiedInterval
from .dynamic import (CECurve, HJSubsolution, WeightedFormOperator, certified_action,
                      geodesic, we_distance)
from .heat import SpectralSemigroup, entropy, fisher, heat_apply
from .report import Report
from .space import FiniteEnergySpace, _as_vector, check_density, gamma, laplacian

log = logging.getLogger(__name__)

BE_TOL = 1e-10


# -- I_K ----------------------------------------------------------------------------

@dataclass(frozen=True)
class IKFunction:
    """``I_K(t) = int_0^t e^{K r} dr``."""

    K: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.K == 0.0:
            out = t.copy()
        else:
            out = np.expm1(self.K * t) / self.K
        return float(out) if out.ndim == 0 else out


def I_K(K: float, t):
    return IKFunction(K)(t)


# -- EVI ------------------------------------------------------------------------------

Oracle = Callable[[np.ndarray, np.ndarray], CertifiedInterval]


@dataclass
class EVIReport(Report):
    K: float = 0.0

    def to_dict(self):
        d = super().to_dict()
        d["K"] = self.K
        return d


def evi_integral_check(W: Oracle, S: Callable, F: Callable, xbar, sigma, K: float,
                       tgrid, tol: float = 0.0, name: str = "evi_integral") -> EVIReport:
    """Integrated EVI: ``W^2(x_t,s)/2 - e^{-Kt} W^2(xbar,s)/2 <= I_{-K}(t)(F(s) - F(x_t))``.

    Residual per ``t``: LHS - RHS with ``W(x_t, s)`` at its lower bound and
    ``W(xbar, s)`` at its upper bound. If ``W(xbar, s)`` is not finite the check
    is vacuous and reported as such.
    """
    tgrid = [float(t) for t in tgrid]
    base = W(xbar, sigma)
    Fs = F(sigma)
    if not math.isfinite(base.lower):
        return EVIReport(name, {"K": K}, tgrid, [], tol, extra={"vacuous": True}, K=K)
    res, pess, details = [], [], []
    for t in tgrid:
        xt = S(xbar, t)
        cur = W(xt, sigma)
        ik = I_K(-K, t)
        decay = math.exp(-K * t)
        Fx = F(xt)
        res.append(0.5 * cur.lower ** 2 - 0.5 * decay * base.upper ** 2 - ik * (Fs - Fx))
        pess.append(0.5 * cur.upper ** 2 - 0.5 * decay * base.lower ** 2 - ik * (Fs - Fx))
        details.append({"W_lower": cur.lower, "W_upper": cur.upper, "F": Fx})
    return EVIReport(name, {"K": K}, tgrid, res, tol,
                     extra={"pessimistic": pess, "W0_lower": base.lower,
                            "W0_upper": base.upper, "F_sigma": Fs, "points": details},
                     K=K)


def evi_regularization_check(W: Oracle, S: Callable, F: Callable, xbar, y, K: float,
                             tgrid, tol: float = 0.0) -> EVIReport:
    """``F(x_t) <= F(y) + W^2(xbar, y) / (2 I_K(t))`` with ``W`` at its lower bound."""
    tgrid = [float(t) for t in tgrid]
    iv = W(xbar, y)
    Fy = F(y)
    res, pess = [], []
    for t in tgrid:
        Fx = F(S(xbar, t))
        ik = I_K(K, t)
        res.append(Fx - Fy - iv.lower ** 2 / (2 * ik))
        pess.append(Fx - Fy - iv.upper ** 2 / (2 * ik))
    return EVIReport("evi_regularization", {"K": K}, tgrid, res, tol,
                     extra={"pessimistic": pess, "W_lower": iv.lower, "W_upper": iv.upper},
                     K=K)


def we_oracle(sp: FiniteEnergySpace, N: int = 8, restarts: int = 0,
              seed: int = 0) -> Oracle:
    """Enclosure ``[W_{E,*} lower, W_E upper]`` valid for both dynamic distances."""

    def W(a, b):
        return we_distance(sp, a, b, N=N, restarts=restarts, seed=seed)

    return W


# -- Bakry-Emery ----------------------------------------------------------------------

def _normalized_samples(sp: FiniteEnergySpace, fsamples) -> np.ndarray:
    F = np.atleast_2d(np.asarray(fsamples, dtype=float))
    if F.shape[1] != sp.n:
        raise ValueError(f"samples have length {F.shape[1]}, expected {sp.n}")
    out = []
    for f in F:
        top = gamma(sp, f).max()
        if top > 0:
            out.append(f / math.sqrt(top))
    return np.array(out).reshape(-1, sp.n)


def _be_tables(sg: SpectralSemigroup, fsamples, tgrid):
    """``(P_t Gamma(g), Gamma(P_t g))`` per time, stacked over samples."""
    sp = sg.space
    G = _normalized_samples(sp, fsamples)
    out = []
    for t in tgrid:
        P = sg.kernel(t)
        pg = np.array([P @ gamma(sp, g) for g in G])
        gp = np.array([gamma(sp, P @ g) for g in G])
        out.append((pg, gp))
    return out


def _be_margins(tables, tgrid, K):
    return [float(np.min(math.exp(-2 * K * t) * pg - gp)) if pg.size else 0.0
            for (pg, gp), t in zip(tables, tgrid)]


def be_check(sp: FiniteEnergySpace, sg: SpectralSemigroup, K: float, fsamples,
             tgrid) -> Report:
    """Gradient contractivity ``Gamma(P_t g) <= e^{-2Kt} P_t Gamma(g)``.

    Samples are rescaled to ``max Gamma(g) = 1`` so the absolute tolerance
    ``1e-10`` is meaningful. Residuals are the negated margins.
    """
    tgrid = [float(t) for t in tgrid]
    margins = _be_margins(_be_tables(sg, fsamples, tgrid), tgrid, K)
    return Report("be_check", {"K": K}, tgrid, [-m for m in margins], BE_TOL,
                  extra={"worst_margin": min(margins) if margins else 0.0})


def be_best_K(sp: FiniteEnergySpace, sg: SpectralSemigroup, fsamples, tgrid,
              tol: float = 1e-8, limit: float = 1e6) -> float:
    """Largest ``K`` passing ``be_check`` on the samples (bisection).

    The margin is nonincreasing in ``K``, so bisection is exact up to ``tol``.
    Returns ``inf`` if no sample is moved (all constant).
    """
    tgrid = [float(t) for t in tgrid]
    tables = _be_tables(sg, fsamples, tgrid)

    def ok(K):
        return min(_be_margins(tables, tgrid, K)) >= -BE_TOL

    if all(pg.size == 0 for pg, _ in tables):
        return math.inf
    lo, hi = -1.0, 1.0
    while not ok(lo):
        lo *= 2
        if lo < -limit:
            return -math.inf
    while ok(hi):
        lo, hi = hi, 2 * hi
        if hi > limit:
            return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def be_best_K_closed_form(sp: FiniteEnergySpace, sg: SpectralSemigroup, fsamples,
                          tgrid) -> float:
    """``min log(P_t Gamma(g) / Gamma(P_t g)) / (2t)`` without tolerance."""
    best = math.inf
    for (pg, gp), t in zip(_be_tables(sg, fsamples, tgrid), tgrid):
        if t <= 0:
            continue
        mask = gp > 0
        if np.any(mask):
            best = min(best, float(np.min(np.log(pg[mask] / gp[mask]))) / (2 * t))
    return best


def contractivity_check(sp: FiniteEnergySpace, sg: SpectralSemigroup, selector: str,
                        rho0, rho1, K: float, tgrid, N: int = 8, tol: float = 1e-3,
                        restarts: int = 0) -> Report:
    """``W(P_t rho0, P_t rho1) <= e^{-Kt} W(rho0, rho1)``.

    Both ``W_E`` and ``W_{E,*}`` lie in ``[we_dual lower, W_E upper]``, which is
    the enclosure used for either selector. The reported residual uses the
    upper bound at time ``t`` against the lower bound at time 0 (a pass is
    therefore certified up to ``tol``); ``extra`` keeps the
    certified-violation residual and the observed ratios.
    """
    if selector not in ("W_E", "W_E*"):
        raise ValueError("selector must be 'W_E' or 'W_E*'")
    rho0 = check_density(sp, rho0)
    rho1 = check_density(sp, rho1)
    W = we_oracle(sp, N, restarts)
    base = W(rho0, rho1)
    if not math.isfinite(base.lower):
        return Report("contractivity", {"selector": selector, "K": K}, [], [], tol,
                      extra={"vacuous": True})
    tgrid = [float(t) for t in tgrid]
    res, viol, ratios = [], [], []
    for t in tgrid:
        cur = W(heat_apply(sg, rho0, t), heat_apply(sg, rho1, t))
        e = math.exp(-K * t)
        res.append(cur.upper - e * base.lower)
        viol.append(cur.lower - e * base.upper)
        ratios.append(cur.upper / base.upper if base.upper > 0 else 0.0)
    return Report("contractivity", {"selector": selector, "K": K, "N": N}, tgrid, res, tol,
                  extra={"certified_violation": viol, "ratio_upper": ratios,
                         "W0_lower": base.lower, "W0_upper": base.upper})


# -- Hopf-Cole -------------------------------------------------------------------------

class HopfColeError(RuntimeError):
    pass


def hopf_cole_operator(sp: FiniteEnergySpace, t: float, phi) -> np.ndarray:
    """Matrix of ``zeta -> t Delta zeta + zeta Delta phi + Gamma(phi, zeta)``."""
    phi = _as_vector(sp, phi, "phi")
    diff = phi[None, :] - phi[:, None]  # phi_j - phi_i
    B = sp.w * diff / (2.0 * sp.m[:, None])
    B = B + np.diag(B.sum(axis=1))
    return t * sp.generator + B


@dataclass
class HopfColeSolution:
    times: np.ndarray
    zetas: np.ndarray  # (steps + 1, n), zetas[k] at s = times[k]
    mass_residuals: np.ndarray
    lower_residuals: np.ndarray  # alpha e^{-D(1-s)} - min zeta_s (<= 0 when the bound holds)
    upper_residuals: np.ndarray  # max zeta_s - beta e^{D(1-s)}
    D: float
    alpha: float
    beta: float

    @property
    def mass_error(self) -> float:
        return float(np.max(np.abs(self.mass_residuals)))

    @property
    def bounds_hold(self) -> bool:
        scale = max(self.beta, 1.0)
        return bool(max(self.lower_residuals.max(), self.upper_residuals.max())
                    <= 1e-12 * scale)


def max_edge_gap(sp: FiniteEnergySpace, phis) -> float:
    """``max |phi_j - phi_i|`` over edges and slices.

    The Hopf-Cole operator is Metzler (hence positivity preserving, with the
    discrete maximum principle behind the two-sided bounds) iff this is at
    most ``2 t``.
    """
    i, j = np.nonzero(sp.w)
    P = np.atleast_2d(np.asarray(phis, dtype=float))
    return float(np.abs(P[:, i] - P[:, j]).max()) if i.size else 0.0


def _phi_at(phis: np.ndarray, s: float) -> np.ndarray:
    N = phis.shape[0] - 1
    x = s * N
    k = min(int(math.floor(x)), N - 1)
    a = x - k
    return (1 - a) * phis[k] + a * phis[k + 1]


def hopf_cole_solve(sp: FiniteEnergySpace, t: float, phicurve, zeta1,
                    steps: int | None = None, check_subsolution: bool = True
                    ) -> HopfColeSolution:
    """Backward implicit Euler for ``zeta' + t Delta zeta + zeta Delta phi + Gamma(phi, zeta) = 0``.

    ``phicurve`` is an ``HJSubsolution`` on ``[0, 1]`` (or an array of slices);
    it is interpolated linearly in ``s`` when ``steps`` differs from its grid.
    Each step solves ``(I - h M(phi_s)) zeta_s = zeta_{s+h}``; since
    ``m' M = 0`` the ``m``-mass is preserved exactly by every step.

    On a graph the first-order part of ``M`` is only monotone when every edge
    gap ``|phi_j - phi_i|`` is at most ``2 t`` (see ``max_edge_gap``); outside
    that regime positivity can fail and a ``HopfColeError`` is raised at the
    first step that leaves the lower bound.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if isinstance(phicurve, HJSubsolution):
        if check_subsolution and phicurve.max_violation(sp) > 1e-10:
            raise HopfColeError("phi is not a Hamilton-Jacobi subsolution")
        phis = phicurve.potentials
    else:
        phis = np.asarray(phicurve, dtype=float)
    zeta1 = _as_vector(sp, zeta1, "zeta1")
    if np.any(zeta1 <= 0):
        raise ValueError("zeta1 must be positive")
    steps = steps or phis.shape[0] - 1
    h = 1.0 / steps
    times = np.linspace(0.0, 1.0, steps + 1)
    D = max(float(np.abs(laplacian(sp, p)).max()) for p in phis)
    alpha, beta = float(zeta1.min()), float(zeta1.max())
    zetas = np.empty((steps + 1, sp.n))
    zetas[-1] = zeta1
    mass1 = float(sp.m @ zeta1)
    I = np.eye(sp.n)
    for k in range(steps - 1, -1, -1):
        s = times[k]
        M = hopf_cole_operator(sp, t, _phi_at(phis, s))
        zetas[k] = np.linalg.solve(I - h * M, zetas[k + 1])
        low = alpha * math.exp(-D * (1 - s))
        if zetas[k].min() < low - 1e-9 * max(1.0, beta):
            i = int(np.argmin(zetas[k]))
            raise HopfColeError(
                f"positivity lost at step {k} (s={s:.4g}): zeta[{i}]={zetas[k, i]:.3e} "
                f"< lower bound {low:.3e}; max edge gap {max_edge_gap(sp, phis):.3g} "
                f"vs 2t = {2 * t:.3g}")
    masses = zetas @ sp.m
    lowers = alpha * np.exp(-D * (1 - times)) - zetas.min(axis=1)
    uppers = zetas.max(axis=1) - beta * np.exp(D * (1 - times))
    return HopfColeSolution(times, zetas, masses - mass1, lowers, uppers, D, alpha, beta)


def evi_witness_from_hopf_cole(sp: FiniteEnergySpace, sg: SpectralSemigroup, t: float,
                               rho, sigma, phicurve: HJSubsolution, psi, K: float,
                               W_rho_sigma: CertifiedInterval,
                               W_t_sigma: CertifiedInterval | None = None,
                               steps: int | None = None) -> Report:
    """Evaluate the Hopf-Cole witness for the integrated EVI.

    With ``zeta_1 = e^{psi/t}`` and ``psi_s = t log zeta_s``::

        A = int rho P_t(phi_1 + psi) - int phi_0 sigma - t int e^{psi/t}
        B = (t / I_{2K}(t)) W^2/2 + t Ent(sigma) - t + t int (e^{psi_0/t} - e^{psi/t})

    and ``A <= B`` is the witness inequality (residual ``A - B``, ``W`` at its
    upper bound). The backward equation's chain-rule defect, which vanishes
    for local forms only, is reported separately.
    """
    rho = check_density(sp, rho)
    sigma = check_density(sp, sigma)
    psi = _as_vector(sp, psi, "psi")
    sol = hopf_cole_solve(sp, t, phicurve, np.exp(psi / t), steps)
    phis = phicurve.potentials
    psis = t * np.log(sol.zetas)
    m = sp.m
    Pt = sg.kernel(t)
    ik = I_K(2 * K, t)
    A = (float(m @ (rho * (Pt @ (phis[-1] + psi)))) - float(m @ (phis[0] * sigma))
         - t * float(m @ np.exp(psi / t)))
    last = t * float(m @ (np.exp(psis[0] / t) - np.exp(psi / t)))
    B = (t / ik) * 0.5 * W_rho_sigma.upper ** 2 + t * entropy(sp, sigma) - t + last
    transport_part = (float(m @ (rho * (Pt @ (phis[-1] + psi))))
                      - float(m @ ((phis[0] + psis[0]) * sigma))
                      - (t / ik) * 0.5 * W_rho_sigma.upper ** 2)
    young_part = (float(m @ (psis[0] * sigma)) - t * float(m @ np.exp(psis[0] / t))
                  - (t * entropy(sp, sigma) - t))
    # chain-rule defect of the log transform, per time slice
    h = 1.0 / (sol.zetas.shape[0] - 1)
    defects = []
    for k in range(sol.zetas.shape[0] - 1):
        s = sol.times[k]
        ph = _phi_at(phis, s)
        ps = psis[k]
        dpsi = (psis[k + 1] - psis[k]) / h
        r = (dpsi + t * laplacian(sp, ps) + gamma(sp, ps) + t * laplacian(sp, ph)
             + gamma(sp, ph, ps))
        defects.append(float(np.abs(r).max()))
    extra = {"A": A, "B": B, "transport_part": transport_part, "young_part": young_part,
             "mass_gap": last / t, "locality_defect": max(defects) if defects else 0.0,
             "mass_error": sol.mass_error}
    grid = ["eq40"]
    res = [A - B]
    if W_t_sigma is not None:
        rt = heat_apply(sg, rho, t)
        lhs = 0.5 * W_t_sigma.lower ** 2 + t * entropy(sp, rt)
        rhs = (t / ik) * 0.5 * W_rho_sigma.upper ** 2 + t * entropy(sp, sigma)
        grid.append("evi_integrated")
        res.append(lhs - rhs)
    return Report("evi_hopf_cole", {"t": t, "K": K}, grid, res, 1e-8, extra=extra)


# -- JKO --------------------------------------------------------------------------------

def _log_mean(a, b):
    out = np.where(np.isclose(a, b, rtol=1e-12, atol=0.0), 0.5 * (a + b), 0.0)
    mask = ~np.isclose(a, b, rtol=1e-12, atol=0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lm = (a - b) / (np.log(a) - np.log(b))
    return np.where(mask, np.nan_to_num(lm), out)


def metric_matrix(sp: FiniteEnergySpace, rho, metric: str = "linear",
                  floor: float = 1e-9) -> np.ndarray:
    """Pseudo-inverse ``L_rho^+`` of the one-step metric at ``rho``.

    ``linear`` uses the arithmetic-mean weights of ``WeightedFormOperator``;
    ``logmean`` uses the logarithmic mean of the endpoint densities (a
    diagnostic alternative). The floor is a solver device only.
    """
    r = np.maximum(np.asarray(rho, dtype=float), floor)
    if metric == "linear":
        L = WeightedFormOperator(sp, r).matrix
    elif metric == "logmean":
        wt = sp.w * _log_mean(r[:, None], r[None, :])
        L = np.diag(wt.sum(axis=1)) - wt
    else:
        raise ValueError(f"unknown metric {metric!r}")
    lam, U = np.linalg.eigh(L)
    keep = lam > 1e-12 * lam.max()
    return (U[:, keep] / lam[keep]) @ U[:, keep].T


@dataclass
class JKOStep:
    density: np.ndarray
    objective: float
    start_objective: float
    flagged: bool = False


def _jko_newton(sp, sigma_k, Q, tau, iters=100):
    m = sp.m
    labels = sp.components
    A = np.array([(labels == c).astype(float) for c in range(labels.max() + 1)])
    n, p = sp.n, A.shape[0]
    uniform = np.array([sigma_k[labels == labels[i]].sum() * m[i] / m[labels == labels[i]].sum()
                        for i in range(n)])
    x = sigma_k.copy() if np.all(sigma_k > 0) else 0.5 * (sigma_k + uniform)

    def obj(s):
        d = s - sigma_k
        return float(np.sum(xlogy(s, s / m))) + 0.5 * float(d @ Q @ d) / tau

    converged = False
    for _ in range(iters):
        d = x - sigma_k
        g = np.log(x / m) + 1.0 + Q @ d / tau
        H = np.diag(1.0 / x) + Q / tau
        KKT = np.block([[H, A.T], [A, np.zeros((p, p))]])
        step = np.linalg.solve(KKT, np.concatenate([-g, np.zeros(p)]))[:n]
        dec = -g @ step
        if dec < 1e-15:
            converged = True
            break
        a = 1.0
        neg = step < 0
        if np.any(neg):
            a = min(1.0, 0.99 * float(np.min(-x[neg] / step[neg])))
        f0 = obj(x)
        while obj(x + a * step) > f0 - 0.25 * a * dec and a > 1e-16:
            a *= 0.5
        x = x + a * step
    return x, obj(x), converged


def jko_step(sp: FiniteEnergySpace, rho_k, tau: float, metric: str = "linear",
             N: int = 4) -> JKOStep:
    """``argmin Ent(rho) + W^2(rho, rho_k) / (2 tau)``.

    ``metric`` is ``linear`` (one-step metric ``L_{rho_k}^+``, the default),
    ``logmean`` or ``geodesic`` (nested discrete geodesic upper bound with
    ``N`` steps, limited to ``n <= 6``). The result never has a larger
    objective than staying put.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    rho_k = check_density(sp, rho_k)
    start = entropy(sp, rho_k)
    if metric == "geodesic":
        return _jko_geodesic(sp, rho_k, tau, N, start)
    Q = metric_matrix(sp, rho_k, metric)
    x, val, ok = _jko_newton(sp, sp.m * rho_k, Q, tau)
    if not ok or val > start + 1e-14:
        log.warning("JKO inner solve failed; staying put")
        return JKOStep(rho_k.copy(), start, start, flagged=True)
    return JKOStep(x / sp.m, val, start)


def _jko_geodesic(sp, rho_k, tau, N, start):
    from scipy.optimize import minimize

    if sp.n > 6:
        raise ValueError("nested geodesic JKO is limited to n <= 6")
    first = jko_step(sp, rho_k, tau, "linear")

    def obj(z):
        e = np.exp(z - z.max())
        s = e / e.sum()
        rho = s / sp.m
        _, action = geodesic(sp, rho, rho_k, N, restarts=0)
        return entropy(sp, rho) + action / (2 * tau)

    z0 = np.log(np.maximum(first.density * sp.m, 1e-12))
    res = minimize(obj, z0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
    e = np.exp(res.x - res.x.max())
    rho = e / e.sum() / sp.m
    if res.fun > start:
        return JKOStep(rho_k.copy(), start, start, flagged=True)
    return JKOStep(rho, float(res.fun), start, flagged=not res.success)


@dataclass
class JKOTrajectory:
    tau: float
    times: np.ndarray
    densities: np.ndarray
    flagged: bool = False

    def entropies(self, sp: FiniteEnergySpace) -> np.ndarray:
        return np.array([entropy(sp, r) for r in self.densities])


def jko_trajectory(sp: FiniteEnergySpace, rho0, tau: float, T: float,
                   metric: str = "linear") -> JKOTrajectory:
    steps = int(round(T / tau))
    if not math.isclose(steps * tau, T, rel_tol=1e-9):
        raise ValueError("T must be a multiple of tau")
    rho = check_density(sp, rho0)
    out = [rho]
    flagged = False
    for _ in range(steps):
        st = jko_step(sp, rho, tau, metric)
        flagged |= st.flagged
        rho = st.density
        out.append(rho)
    return JKOTrajectory(tau, tau * np.arange(steps + 1), np.array(out), flagged)


def jko_heat_gap(sp: FiniteEnergySpace, sg: SpectralSemigroup, rho0, tau: float,
                 T: float, metric: str = "linear") -> float:
    """``int |rho^JKO(T) - P_T rho0| dm``."""
    traj = jko_trajectory(sp, rho0, tau, T, metric)
    return float(sp.m @ np.abs(traj.densities[-1] - heat_apply(sg, rho0, T)))


def jko_convergence_report(sp: FiniteEnergySpace, sg: SpectralSemigroup, rho0,
                           taus, T: float = 0.5, metric: str = "linear",
                           band=(1.5, 3.0)) -> Report:
    """Ratios of consecutive endpoint gaps as ``tau`` halves; pass iff all in ``band``."""
    gaps = [jko_heat_gap(sp, sg, rho0, tau, T, metric) for tau in taus]
    ratios = [g0 / g1 if g1 > 0 else math.inf for g0, g1 in zip(gaps, gaps[1:])]
    lo, hi = band
    res = [max(lo - r, r - hi) for r in ratios]
    return Report("jko_identification", {"T": T, "metric": metric}, list(taus[1:]),
                  res, 0.0, extra={"gaps": gaps, "ratios": ratios, "taus": list(taus)})


# -- functional inequalities ----------------------------------------------------------

def poincare_constant(sg: SpectralSemigroup) -> float:
    gap = sg.spectral_gap
    return math.inf if gap == 0 else 1.0 / gap


def functional_inequalities(sp: FiniteEnergySpace, sg: SpectralSemigroup, K: float,
                            rng: np.random.Generator, pairs: int = 20,
                            varrho: float = 0.1, samples=None, N: int = 8,
                            be_samples=None, be_times=(0.05, 0.1, 0.5, 1.0)) -> Report:
    """Poincare constant, the linear-curve bound, LSI ratio and Talagrand.

    Residual groups (``grid`` labels): ``eq48`` ``W_E^up^2 - c_P/varrho |rho1-rho0|^2``;
    ``talagrand`` ``(K/2) W^lo^2 - Ent(mu)`` (certified violation when positive).
    """
    cP = poincare_constant(sg)
    grid, res = [], []
    W = we_oracle(sp, N)
    if not sp.is_connected:
        return Report("functional_inequalities", {"K": K}, [], [], 0.0,
                      extra={"c_P": math.inf, "c_LS": math.inf,
                             "talagrand_constant": 0.0})
    eq48 = []
    for k in range(pairs):
        r0 = varrho + (1 - varrho) * _random_density(sp, rng)
        r1 = varrho + (1 - varrho) * _random_density(sp, rng)
        lin = CECurve.linear(sp, r0, r1, 2)
        up = certified_action(sp, lin)
        bound = cP / varrho * float(sp.m @ (r1 - r0) ** 2)
        grid.append(f"eq48[{k}]")
        res.append(up - bound)
        eq48.append({"W2_upper": up, "bound": bound})
    if samples is None:
        samples = [_random_density(sp, rng) for _ in range(5)]
    ones = np.ones(sp.n)
    ratios_lsi, tal = [], []
    for k, mu in enumerate(samples):
        mu = check_density(sp, mu)
        ent = entropy(sp, mu)
        fi = fisher(sp, mu)
        if fi > 0:
            ratios_lsi.append(2 * ent / fi)
        iv = W(mu, ones)
        grid.append(f"talagrand[{k}]")
        res.append(0.5 * K * iv.lower ** 2 - ent)
        tal.append({"ent": ent, "W_lower": iv.lower, "W_upper": iv.upper,
                    "K_lower_est": 2 * ent / iv.upper ** 2 if iv.upper > 0 else math.inf,
                    "K_upper_est": 2 * ent / iv.lower ** 2 if iv.lower > 0 else math.inf})
    extra = {"c_P": cP, "spectral_gap": sg.spectral_gap, "eq48": eq48,
             "c_LS": max(ratios_lsi) if ratios_lsi else 0.0,
             "talagrand": tal,
             "talagrand_constant": min((d["K_lower_est"] for d in tal), default=math.inf)}
    if be_samples is not None:
        extra["be_best_K"] = be_best_K(sp, sg, be_samples, be_times)
        extra["be_pass_at_K"] = bool(extra["be_best_K"] >= K)
    return Report("functional_inequalities", {"K": K, "varrho": varrho, "pairs": pairs},
                  grid, res, 1e-9, extra=extra)


def _random_density(sp, rng):
    x = rng.dirichlet(np.ones(sp.n))
    return x / sp.m


# -- entropy convexity -------------------------------------------------------------------

def entropy_convexity_check(sp: FiniteEnergySpace, curve: CECurve, K: float,
                            W: CertifiedInterval | None = None,
                            sg: SpectralSemigroup | None = None, t: float | None = None,
                            tol: float = 0.0) -> Report:
    """K-convexity of the entropy along a discrete geodesic.

    Without ``sg``: residual ``Ent(rho_s) - (1-s)Ent(rho_0) - s Ent(rho_1) +
    (K/2) s(1-s) W^2`` with ``W`` at its lower bound. With ``sg`` and ``t``
    the heat flow is applied to the interior nodes and the chain slack
    ``eps^2 s(1-s)/(2 I_K(t))`` is added, where ``eps^2 = N^2 max_k hop_k^2 -
    W_lower^2`` and hops are bounded by segment actions.
    """
    rhos = curve.densities(sp)
    N = curve.N
    s = curve.times
    if W is None:
        W = CertifiedInterval(0.0, math.sqrt(certified_action(sp, curve)))
    e0, e1 = entropy(sp, rhos[0]), entropy(sp, rhos[-1])
    eps2 = 0.0
    if sg is not None:
        if t is None or t <= 0:
            raise ValueError("heat time t must be positive")
        # a segment traversed in time 1/N has length <= sqrt(q_k) where q_k is
        # the action of the same segment reparameterized to unit time
        hops = [certified_action(sp, CECurve(curve.masses[k:k + 2])) for k in range(N)]
        eps2 = max(0.0, N ** 2 * max(hops) - W.lower ** 2)
    res = []
    for k in range(N + 1):
        r = rhos[k]
        if sg is not None:
            r = heat_apply(sg, r, t)
        val = entropy(sp, r) - (1 - s[k]) * e0 - s[k] * e1 + 0.5 * K * s[k] * (1 - s[k]) * W.lower ** 2
        if sg is not None:
            val -= eps2 * s[k] * (1 - s[k]) / (2 * I_K(K, t))
        res.append(val)
    return Report("entropy_convexity", {"K": K, "heat_time": t}, list(s), res, tol,
                  extra={"eps2": eps2, "W_lower": W.lower, "W_upper": W.upper})
