"""Refinement and convergence studies shared by the CLI, scripts and tests.

Each study returns a ``Report`` whose residuals are consecutive differences
(or band excursions); a study passes when the asserted trend holds. Observed
values are kept in ``extra`` -- continuum limits are never asserted.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .builders import grid_of, mehler_oracle, ou_grid
from .dynamic import we_distance
from .flows import be_best_K, evi_integral_check, hopf_cole_solve, max_edge_gap
from .heat import (SpectralSemigroup, entropy, entropy_dissipation_check,
                   fisher_defect, heat_apply)
from .report import Report
from .space import FiniteEnergySpace

DEFAULT_HS = (0.5, 0.25, 0.125)


def _decreasing(check: str, params: dict, grid, values, extra: dict) -> Report:
    """Strict decrease of ``values``; residuals are ``v[k+1] - v[k]``."""
    res = [b - a for a, b in zip(values, values[1:])]
    return Report(check, params, list(grid[1:]), res, 0.0,
                  extra={"values": list(values), **extra},
                  passed=all(r < 0 for r in res))


# -- densities and test functions on the OU grid ------------------------------------

def gaussian_density(sp: FiniteEnergySpace, mean: float, std: float) -> np.ndarray:
    """Density w.r.t. ``m`` proportional to the ``N(mean, std^2)`` profile."""
    x = grid_of(sp)
    ratio = np.exp(-0.5 * ((x - mean) / std) ** 2 + 0.5 * x * x)
    return ratio / float(sp.m @ ratio)


def ou_test_functions(sp: FiniteEnergySpace) -> np.ndarray:
    """Smooth sample functions used for gradient-contractivity estimates."""
    x = grid_of(sp)
    return np.array([np.sin(x), x, np.tanh(x), np.exp(-x * x),
                     np.cos(2 * x) * np.exp(-x * x / 4), x * x])


# -- OU refinement ---------------------------------------------------------------------

def mehler_refinement(L: float = 4.0, hs: Sequence[float] = DEFAULT_HS,
                      t: float = 0.1) -> Report:
    """Sup-gap between the spectral heat flow and Mehler's formula for ``exp(-x^2)``."""
    gaps = []
    for h in hs:
        sp = ou_grid(L, h)
        f = np.exp(-grid_of(sp) ** 2)
        sg = SpectralSemigroup.of(sp)
        gaps.append(float(np.abs(heat_apply(sg, f, t) - mehler_oracle(sp, f, t)).max()))
    return _decreasing("mehler_refinement", {"L": L, "t": t}, list(hs), gaps, {"h": list(hs)})


def be_refinement(L: float = 4.0, hs: Sequence[float] = DEFAULT_HS,
                  times: Sequence[float] = (0.01, 0.05, 0.1, 0.25, 0.5, 1.0),
                  band=(0.8, 1.2)) -> Report:
    """Best gradient-contractivity constant per grid, moving monotonically toward 1.

    Residuals: ``|K_{k+1} - 1| - |K_k - 1|`` for each refinement, then the
    band excursion of the finest estimate.
    """
    Ks = []
    for h in hs:
        sp = ou_grid(L, h)
        Ks.append(be_best_K(sp, SpectralSemigroup.of(sp), ou_test_functions(sp), times))
    dist = [abs(K - 1.0) for K in Ks]
    res = [b - a for a, b in zip(dist, dist[1:])]
    lo, hi = band
    res.append(max(lo - Ks[-1], Ks[-1] - hi))
    grid = list(hs[1:]) + ["finest_in_band"]
    passed = all(r < 0 for r in res[:-1]) and res[-1] <= 0
    return Report("be_refinement", {"L": L, "times": list(times), "band": list(band)},
                  grid, res, 0.0, extra={"best_K": Ks, "h": list(hs)}, passed=passed)


def evi_refinement(L: float = 4.0, hs: Sequence[float] = DEFAULT_HS, K: float = 1.0,
                   tgrid: Sequence[float] = (0.05, 0.1, 0.2, 0.4), N: int = 8,
                   start=(1.0, 0.8), target=(-0.5, 0.9)) -> Report:
    """Integrated EVI for the entropy with the dynamic distance enclosure."""
    worst, pess, reports = [], [], []
    for h in hs:
        sp = ou_grid(L, h)
        sg = SpectralSemigroup.of(sp)
        rep = evi_integral_check(
            lambda a, b, sp=sp: we_distance(sp, a, b, N=N, restarts=0),
            lambda r, t, sg=sg: heat_apply(sg, r, t),
            lambda r, sp=sp: entropy(sp, r),
            gaussian_density(sp, *start), gaussian_density(sp, *target), K, tgrid)
        worst.append(rep.max_violation)
        pess.append(max(rep.extra["pessimistic"]))
        reports.append(rep.to_dict())
    return _decreasing("evi_refinement", {"L": L, "K": K, "N": N, "tgrid": list(tgrid)},
                       list(hs), worst, {"h": list(hs), "pessimistic": pess,
                                         "reports": reports})


def fisher_defect_refinement(L: float = 4.0, hs: Sequence[float] = DEFAULT_HS,
                             bump=(0.5, 0.7)) -> Report:
    """``|4 E(sqrt rho) - F(rho)|`` for a smooth Gaussian bump density."""
    vals = []
    for h in hs:
        sp = ou_grid(L, h)
        vals.append(fisher_defect(sp, gaussian_density(sp, *bump)))
    rates = [math.log2(a / b) for a, b in zip(vals, vals[1:])]
    return _decreasing("fisher_defect_refinement", {"L": L, "bump": list(bump)},
                       list(hs), vals, {"h": list(hs), "observed_order": rates})


# -- entropy dissipation order ------------------------------------------------------------

def dissipation_order(sg: SpectralSemigroup, rho0, tgrid, dts: Sequence[float],
                      min_order: float = 1.8) -> Report:
    """Observed order of the centered-difference residual under step halving.

    Order per refinement is ``log2(max_res(dt) / max_res(dt/2))``; the residual
    is ``min_order - order``.
    """
    errs = [entropy_dissipation_check(sg, rho0, tgrid, dt).max_violation for dt in dts]
    orders = [math.log(a / b) / math.log(d0 / d1)
              for a, b, d0, d1 in zip(errs, errs[1:], dts, dts[1:])]
    return Report("entropy_dissipation_order", {"tgrid": list(tgrid), "min_order": min_order},
                  list(dts[1:]), [min_order - o for o in orders], 0.0,
                  extra={"dts": list(dts), "errors": errs, "orders": orders})


# -- Hopf-Cole -------------------------------------------------------------------------------

def random_admissible_potentials(sp: FiniteEnergySpace, rng: np.random.Generator, t: float,
                                 slices: int = 9) -> np.ndarray:
    """Random potential slices rescaled so every edge gap is below ``2t``."""
    phis = np.cumsum(rng.normal(size=(slices, sp.n)), axis=0)
    gap = max_edge_gap(sp, phis)
    scale = rng.uniform(0.2, 1.0) * 2 * t / gap if gap > 0 else 1.0
    return phis * scale


def hopf_cole_trials(sp: FiniteEnergySpace, rng: np.random.Generator, trials: int = 20,
                     t: float = 0.5, steps: int = 40, mass_tol: float = 1e-10) -> Report:
    """Mass preservation and two-sided bounds over random admissible data.

    Residuals per trial: ``mass_error - mass_tol`` and the largest bound
    residual (both must be nonpositive).
    """
    grid, res, masses = [], [], []
    for k in range(trials):
        phis = random_admissible_potentials(sp, rng, t)
        zeta1 = np.exp(rng.normal(size=sp.n))
        sol = hopf_cole_solve(sp, t, phis, zeta1, steps=steps)
        scale = max(sol.beta, 1.0)
        grid += [f"mass[{k}]", f"bounds[{k}]"]
        res += [sol.mass_error - mass_tol,
                max(sol.lower_residuals.max(), sol.upper_residuals.max()) - 1e-12 * scale]
        masses.append(sol.mass_error)
    return Report("hopf_cole", {"t": t, "steps": steps, "trials": trials}, grid, res, 0.0,
                  extra={"mass_errors": masses, "mass_tol": mass_tol})
