"""Distances induced by function families and by the Dirichlet form.

``d_E(x, y) = sup { f(x) - f(y) : Gamma(f) <= 1 }`` is computed with certified
bounds by the log-barrier solver. The epsilon-chain distance ``d^eps`` only
allows hops of length at most ``eps``; on a finite set its supremum over
``eps`` is ``+inf`` off the diagonal, so it is exposed parametrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barrier import BarrierSettings, maximize_over_gamma_ball
from .certify import CertifiedInterval
from .space import FiniteEnergySpace
from .transport import ExtendedDistanceMatrix, _as_edm


@dataclass(frozen=True)
class GammaBallProgram:
    """``sup { f(source) - f(target) : Gamma(f) <= 1 }`` on ``space``."""

    space: FiniteEnergySpace
    source: int
    target: int
    settings: BarrierSettings = field(default_factory=BarrierSettings)

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError("source and target must differ")
        for idx in (self.source, self.target):
            if not 0 <= idx < self.space.n:
                raise IndexError(f"point index {idx} out of range")

    def objective(self) -> np.ndarray:
        c = np.zeros(self.space.n)
        c[self.source] += 1.0
        c[self.target] -= 1.0
        return c

    def solve(self) -> CertifiedInterval:
        sp = self.space
        if sp.components[self.source] != sp.components[self.target]:
            return CertifiedInterval.infinite(note="points in different components")
        return maximize_over_gamma_ball(sp, self.objective(), self.settings)


def intrinsic_distance(sp: FiniteEnergySpace, x: int, y: int,
                       settings: BarrierSettings | None = None) -> CertifiedInterval:
    if x == y:
        if not 0 <= x < sp.n:
            raise IndexError(f"point index {x} out of range")
        return CertifiedInterval.exact(0.0, np.zeros(sp.n))
    return GammaBallProgram(sp, x, y, settings or BarrierSettings()).solve()


def intrinsic_distance_matrix(sp: FiniteEnergySpace,
                              settings: BarrierSettings | None = None
                              ) -> tuple[np.ndarray, np.ndarray]:
    """Certified lower and upper matrices of ``d_E`` over all pairs."""
    lo = np.zeros((sp.n, sp.n))
    up = np.zeros((sp.n, sp.n))
    for i in range(sp.n):
        for j in range(i + 1, sp.n):
            iv = intrinsic_distance(sp, i, j, settings)
            lo[i, j] = lo[j, i] = iv.lower
            up[i, j] = up[j, i] = iv.upper
    return lo, up


def distance_from_family(family) -> ExtendedDistanceMatrix:
    """``d(x, y) = sup_{f in family} |f(x) - f(y)|``.

    The result has ``semidistance=False`` exactly when the family separates
    points.
    """
    A = np.atleast_2d(np.asarray(family, dtype=float))
    if A.size == 0:
        raise ValueError("empty function family")
    d = np.max(np.abs(A[:, :, None] - A[:, None, :]), axis=0)
    n = d.shape[0]
    separates = bool(np.all(d[~np.eye(n, dtype=bool)] > 0))
    return ExtendedDistanceMatrix(d, semidistance=not separates)


def epsilon_chain_distance(d, eps: float) -> ExtendedDistanceMatrix:
    """Shortest chains whose individual hops have length at most ``eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = _as_edm(d)
    D = np.where(d.d <= eps, d.d, math.inf)
    np.fill_diagonal(D, 0.0)
    for k in range(d.n):
        D = np.minimum(D, D[:, k][:, None] + D[k, :][None, :])
    return ExtendedDistanceMatrix(D, semidistance=d.semidistance)


def midpoint_chain(d, x: int, y: int, N: int, eps: float,
                   eps0: float | None = None) -> list[int] | None:
    """Chain ``x = x_0, ..., x_N = y`` with hops ``<= sqrt(D(x,y)^2 + eps^2) / N``.

    ``D`` is ``d^eps0`` when ``eps0`` is given and ``d`` otherwise. Among
    admissible chains the one with least sum of squared hops is returned;
    ``None`` means no admissible chain exists.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    D = _as_edm(d) if eps0 is None else epsilon_chain_distance(d, eps0)
    D = D.d
    if not math.isfinite(D[x, y]):
        return None
    bound = math.sqrt(D[x, y] ** 2 + eps ** 2) / N
    hop = np.where(D <= bound * (1 + 1e-12), D ** 2, math.inf)
    n = D.shape[0]
    cost = np.full(n, math.inf)
    cost[x] = 0.0
    back = []
    for _ in range(N):
        total = cost[:, None] + hop
        prev = np.argmin(total, axis=0)
        cost = total[prev, np.arange(n)]
        back.append(prev)
    if not math.isfinite(cost[y]):
        return None
    chain = [y]
    for prev in reversed(back):
        chain.append(int(prev[chain[-1]]))
    return chain[::-1]
