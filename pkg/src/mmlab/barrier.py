"""Log-barrier Newton method for ``max c.f  s.t.  Gamma(f)_i <= 1``.

Weak duality gives a certified upper bound for any positive multipliers
``lam``::

    c.f <= sum_i lam_i + 1/4 c' Q_lam^+ c,    Q_lam = sum_i lam_i M_i

where ``Gamma(f)_i = f' M_i f``. The barrier iterates supply strictly feasible
``f`` (lower bounds) and the multipliers ``lam_i = 1 / (t (1 - Gamma_i))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .certify import CertifiedInterval
from .space import FiniteEnergySpace, gamma


@dataclass(frozen=True)
class BarrierSettings:
    tol: float = 1e-9
    max_newton: int = 200
    max_outer: int = 40
    t0: float = 1.0
    factor: float = 10.0


class _EdgeForm:
    """``Gamma(f) = B @ (D f)**2`` with edge incidence ``D`` and weights ``B``."""

    def __init__(self, w: np.ndarray, m: np.ndarray):
        k = m.size
        i, j = np.nonzero(np.triu(w))
        self.k = k
        self.D = np.zeros((i.size, k))
        self.D[np.arange(i.size), i] = 1.0
        self.D[np.arange(i.size), j] = -1.0
        we = w[i, j]
        self.B = np.zeros((k, i.size))
        self.B[i, np.arange(i.size)] = we / (2 * m[i])
        self.B[j, np.arange(i.size)] = we / (2 * m[j])

    def gamma(self, f):
        return self.B @ (self.D @ f) ** 2

    def jacobian(self, f):
        return 2.0 * (self.B * (self.D @ f)[None, :]) @ self.D

    def weighted_hessian(self, lam):
        """``sum_i lam_i * Hess(Gamma_i) = 2 D' diag(B' lam) D``."""
        return 2.0 * (self.D.T * (self.B.T @ lam)[None, :]) @ self.D


def _scaled_solve(H, g):
    """Solve ``H x = g`` after symmetric Jacobi scaling.

    Near the optimum the barrier Hessian mixes entries of very different
    magnitude; diagonal scaling keeps the factorization well conditioned.
    """
    d = 1.0 / np.sqrt(np.diag(H))
    A = H * d[:, None] * d[None, :]
    try:
        x = np.linalg.solve(A, g * d)
    except np.linalg.LinAlgError:
        x = np.linalg.lstsq(A, g * d, rcond=1e-15)[0]
    return d * x


def _dual_bound(form: _EdgeForm, lam: np.ndarray, c: np.ndarray) -> float:
    Q = 0.5 * form.weighted_hessian(lam)
    # c sums to zero, so grounding node 0 evaluates c' Q^+ c
    y = np.linalg.solve(Q[1:, 1:], c[1:])
    return float(lam.sum() + 0.25 * c[1:] @ y)


def _solve_component(w, m, c, settings: BarrierSettings):
    k = m.size
    form = _EdgeForm(w, m)
    f = np.zeros(k)
    t = settings.t0
    best_lower, best_f = 0.0, f.copy()
    best_upper, best_lam = math.inf, None
    flagged = True
    for _ in range(settings.max_outer):
        for _ in range(settings.max_newton):
            G = form.gamma(f)
            s = 1.0 - G
            J = form.jacobian(f) / s[:, None]
            grad = -t * c + J.sum(axis=0)
            H = J.T @ J + form.weighted_hessian(1.0 / s)
            # pin f_0 = 0 to remove the constant direction
            step = np.zeros(k)
            step[1:] = -_scaled_solve(H[1:, 1:], grad[1:])
            dec2 = -grad @ step
            if dec2 < 1e-12:
                break
            a = 1.0
            obj = -t * c @ f - np.log(s).sum()
            while True:
                fn = f + a * step
                Gn = form.gamma(fn)
                if np.all(Gn < 1.0):
                    objn = -t * c @ fn - np.log(1.0 - Gn).sum()
                    if objn <= obj - 0.25 * a * dec2:
                        break
                a *= 0.5
                if a < 1e-14:
                    break
            if a < 1e-14:
                break
            f = fn
        G = form.gamma(f)
        if np.all(G <= 1.0):
            low = float(c @ f)
            if low > best_lower:
                best_lower, best_f = low, f.copy()
        lam = 1.0 / (t * np.maximum(1.0 - G, 1e-300))
        up = _dual_bound(form, lam, c)
        if up < best_upper:
            best_upper, best_lam = up, lam
        if best_upper - best_lower <= settings.tol * (1.0 + abs(best_lower)):
            flagged = False
            break
        t *= settings.factor
    return best_lower, best_upper, best_f - best_f[0], best_lam, flagged


def maximize_over_gamma_ball(sp: FiniteEnergySpace, c,
                             settings: BarrierSettings = BarrierSettings()
                             ) -> CertifiedInterval:
    """Certified interval for ``sup { c.f : Gamma(f) <= 1 }``.

    The lower certificate is a feasible ``f``; the upper certificate the
    multiplier vector. Unbounded problems (``c`` not summing to zero on some
    conductance component) are detected up front and return ``[inf, inf]``.
    """
    c = np.asarray(c, dtype=float)
    labels = sp.components
    scale = 1.0 + np.abs(c).sum()
    for k in range(labels.max() + 1):
        if abs(c[labels == k].sum()) > 1e-12 * scale:
            return CertifiedInterval.infinite(note=f"unbounded on component {k}")
    f_all = np.zeros(sp.n)
    lam_all = np.zeros(sp.n)
    lower = upper = 0.0
    flagged = False
    for k in range(labels.max() + 1):
        idx = np.flatnonzero(labels == k)
        if idx.size == 1 or not np.any(c[idx]):
            continue
        w = sp.w[np.ix_(idx, idx)]
        lo, up, f, lam, flag = _solve_component(w, sp.m[idx], c[idx], settings)
        f_all[idx] = f
        if lam is not None:
            lam_all[idx] = lam
        lower += lo
        upper += up
        flagged |= flag
    upper = max(upper, lower)
    return CertifiedInterval(lower, upper, f_all, lam_all, flagged=flagged)


def is_gamma_feasible(sp: FiniteEnergySpace, f, tol: float = 0.0) -> bool:
    return bool(np.all(gamma(sp, f) <= 1.0 + tol))
