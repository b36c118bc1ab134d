"""Named space constructors and the continuum Ornstein-Uhlenbeck oracle."""

from __future__ import annotations

import math

import numpy as np

from .space import FiniteEnergySpace, _as_vector


def two_point() -> FiniteEnergySpace:
    """``m = (1/2, 1/2)``, unit conductance: ``d_E = 1``, spectral gap 4."""
    return FiniteEnergySpace(np.array([0.5, 0.5]), np.array([[0.0, 1.0], [1.0, 0.0]]),
                             name="two_point")


def path(n: int, weight: float = 1.0) -> FiniteEnergySpace:
    """Uniform measure on ``n`` points, conductance ``weight`` between neighbours."""
    if n < 2:
        raise ValueError("path needs n >= 2")
    w = np.zeros((n, n))
    i = np.arange(n - 1)
    w[i, i + 1] = w[i + 1, i] = weight
    return FiniteEnergySpace(np.full(n, 1.0 / n), w, name=f"path{n}")


def cycle(n: int, weight: float = 1.0) -> FiniteEnergySpace:
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    w = np.zeros((n, n))
    i = np.arange(n)
    w[i, (i + 1) % n] = w[(i + 1) % n, i] = weight
    return FiniteEnergySpace(np.full(n, 1.0 / n), w, name=f"cycle{n}")


def complete(n: int, weight: float = 1.0) -> FiniteEnergySpace:
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    w = weight * (np.ones((n, n)) - np.eye(n))
    return FiniteEnergySpace(np.full(n, 1.0 / n), w, name=f"complete{n}")


def ou_points(L: float, h: float) -> np.ndarray:
    if h <= 0 or L <= 0:
        raise ValueError(f"need h > 0 and L > 0 (got h={h}, L={L})")
    k = int(round(2 * L / h))
    if not math.isclose(k * h, 2 * L, rel_tol=1e-12):
        raise ValueError(f"h={h} does not divide 2L={2 * L}")
    return -L + h * np.arange(k + 1)


def ou_grid(L: float = 4.0, h: float = 0.25) -> FiniteEnergySpace:
    """Gaussian-weighted grid on ``[-L, L]`` approximating ``f'' - x f'``.

    ``m_i = exp(-x_i^2/2)/Z`` and ``w_{i,i+1} = exp(-(x_i^2 + x_{i+1}^2)/4)/(Z h^2)``.
    """
    x = ou_points(L, h)
    g = np.exp(-0.5 * x * x)
    Z = g.sum()
    n = x.size
    w = np.zeros((n, n))
    i = np.arange(n - 1)
    w[i, i + 1] = w[i + 1, i] = np.exp(-(x[i] ** 2 + x[i + 1] ** 2) / 4) / (Z * h * h)
    return FiniteEnergySpace(g / Z, w, name=f"ou_grid(L={L},h={h})")


def degenerate_grid(p: int, q: int, h: float = 1.0) -> FiniteEnergySpace:
    """``p x q`` grid whose energy only sees the first coordinate.

    Point ``(i, j)`` has index ``i * q + j``; conductances join ``(i, j)`` and
    ``(i + 1, j)`` only, so distinct columns ``j`` never communicate.
    """
    if p < 1 or q < 1:
        raise ValueError("grid sides must be positive")
    if h <= 0:
        raise ValueError("h must be positive")
    x = (np.arange(p) - (p - 1) / 2) * h
    y = (np.arange(q) - (q - 1) / 2) * h
    g = np.exp(-0.5 * (x[:, None] ** 2 + y[None, :] ** 2)).ravel()
    Z = g.sum()
    n = p * q
    w = np.zeros((n, n))
    for i in range(p - 1):
        for j in range(q):
            a, b = i * q + j, (i + 1) * q + j
            w[a, b] = w[b, a] = math.sqrt(g[a] * g[b]) / (Z * h * h)
    return FiniteEnergySpace(g / Z, w, name=f"degenerate_grid({p},{q})")


BUILDERS = {
    "two_point": two_point,
    "path": path,
    "cycle": cycle,
    "complete": complete,
    "ou_grid": ou_grid,
    "degenerate_grid": degenerate_grid,
}


def build_space(name: str, params: dict | None = None) -> FiniteEnergySpace:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown space {name!r}; choose from {sorted(BUILDERS)}") from None
    return builder(**(params or {}))


def grid_of(sp: FiniteEnergySpace) -> np.ndarray:
    """Recover ``x_i`` of an ``ou_grid`` space from its name."""
    name = sp.name
    if not name.startswith("ou_grid("):
        raise ValueError("not an ou_grid space")
    args = dict(kv.split("=") for kv in name[len("ou_grid("):-1].split(","))
    return ou_points(float(args["L"]), float(args["h"]))


def mehler_oracle(sp: FiniteEnergySpace, f, t: float, nodes: int = 64) -> np.ndarray:
    """``P_t f(x) = E f(e^{-t} x + sqrt(1 - e^{-2t}) Y)`` with ``Y ~ N(0, 1)``.

    ``f`` is interpolated linearly between grid points and extended by
    constants outside ``[-L, L]``.
    """
    if t < 0:
        raise ValueError(f"negative time {t}")
    x = grid_of(sp)
    f = _as_vector(sp, f)
    y, wts = np.polynomial.hermite_e.hermegauss(nodes)
    wts = wts / math.sqrt(2 * math.pi)
    if not math.isclose(wts.sum(), 1.0, rel_tol=1e-12):
        raise ArithmeticError("Gauss-Hermite weights do not sum to one")
    pts = math.exp(-t) * x[:, None] + math.sqrt(-math.expm1(-2 * t)) * y[None, :]
    return np.interp(pts, x, f) @ wts
