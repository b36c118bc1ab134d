"""Finite energy-measure spaces.

A space is a finite set of points carrying a probability measure ``m`` and a
symmetric conductance matrix ``w``. The Dirichlet form, carre du champ and
Laplacian are the graph realizations

    E(f, g)      = 1/2 sum_ij w_ij (f_i - f_j)(g_i - g_j)
    Gamma(f,g)_i = 1/(2 m_i) sum_j w_ij (f_i - f_j)(g_i - g_j)
    Delta f_i    = 1/m_i sum_j w_ij (f_j - f_i)

All evaluations are direct sums; nothing in this module iterates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components


class SpaceError(ValueError):
    """Invalid space data; the message names the first offending entry."""


def _as_vector(sp: "FiniteEnergySpace", f, name: str = "f") -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (sp.n,):
        raise ValueError(f"{name} has shape {f.shape}, expected ({sp.n},)")
    return f


@dataclass(frozen=True, eq=False)
class FiniteEnergySpace:
    """Points with probability weights ``m`` and conductances ``w``.

    ``m`` is normalized on construction. Instances are immutable; derived
    quantities (components, spectral data) are cached on first use.
    """

    m: np.ndarray
    w: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(-1)
        w = np.array(self.w, dtype=float)
        n = m.size
        if n == 0:
            raise SpaceError("empty space")
        if w.shape != (n, n):
            raise SpaceError(f"w has shape {w.shape}, expected ({n}, {n})")
        if not np.all(np.isfinite(m)):
            i = int(np.flatnonzero(~np.isfinite(m))[0])
            raise SpaceError(f"m[{i}] is not finite")
        bad = np.flatnonzero(m <= 0)
        if bad.size:
            raise SpaceError(f"m[{bad[0]}] = {m[bad[0]]} is not positive")
        if not np.all(np.isfinite(w)):
            i, j = np.argwhere(~np.isfinite(w))[0]
            raise SpaceError(f"w[{i},{j}] is not finite")
        neg = np.argwhere(w < 0)
        if neg.size:
            i, j = neg[0]
            raise SpaceError(f"w[{i},{j}] = {w[i, j]} is negative")
        diag = np.flatnonzero(np.diag(w) != 0)
        if diag.size:
            i = diag[0]
            raise SpaceError(f"w[{i},{i}] = {w[i, i]} must be zero")
        asym = np.argwhere(w != w.T)
        if asym.size:
            i, j = asym[0]
            raise SpaceError(f"w[{i},{j}] = {w[i, j]} != w[{j},{i}] = {w[j, i]}")
        m = m / m.sum()
        m.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.m.size

    @cached_property
    def components(self) -> np.ndarray:
        """Connected-component label of every point in the conductance graph."""
        _, labels = connected_components(self.w > 0, directed=False)
        labels.setflags(write=False)
        return labels

    @property
    def n_components(self) -> int:
        return int(self.components.max()) + 1

    @property
    def is_connected(self) -> bool:
        return self.n_components == 1

    @cached_property
    def generator(self) -> np.ndarray:
        """Matrix of the Laplacian: ``generator @ f == laplacian(self, f)``."""
        A = self.w / self.m[:, None]
        A = A - np.diag(A.sum(axis=1))
        A.setflags(write=False)
        return A

    @cached_property
    def stiffness(self) -> np.ndarray:
        """Unnormalized graph Laplacian K with ``f @ K @ g == energy(f, g)``."""
        K = np.diag(self.w.sum(axis=1)) - self.w
        K.setflags(write=False)
        return K

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {"m": self.m.tolist(), "w": self.w.tolist()}

    @classmethod
    def from_dict(cls, data: dict, name: str = "") -> "FiniteEnergySpace":
        if "m" not in data or "w" not in data:
            raise SpaceError("space JSON needs keys 'm' and 'w'")
        return cls(np.asarray(data["m"], dtype=float),
                   np.asarray(data["w"], dtype=float), name=name)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "FiniteEnergySpace":
        return cls.from_dict(json.loads(Path(path).read_text()), name=str(path))

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<FiniteEnergySpace{label} n={self.n} components={self.n_components}>"


def energy(sp: FiniteEnergySpace, f, g=None) -> float:
    """Dirichlet form E(f, g); ``g`` defaults to ``f``."""
    f = _as_vector(sp, f)
    g = f if g is None else _as_vector(sp, g, "g")
    df = f[:, None] - f[None, :]
    dg = g[:, None] - g[None, :]
    return 0.5 * float(np.sum(sp.w * df * dg))


def gamma(sp: FiniteEnergySpace, f, g=None) -> np.ndarray:
    """Carre du champ Gamma(f, g) as a pointwise vector."""
    f = _as_vector(sp, f)
    g = f if g is None else _as_vector(sp, g, "g")
    df = f[:, None] - f[None, :]
    dg = g[:, None] - g[None, :]
    return np.sum(sp.w * df * dg, axis=1) / (2.0 * sp.m)


def laplacian(sp: FiniteEnergySpace, f) -> np.ndarray:
    f = _as_vector(sp, f)
    return np.sum(sp.w * (f[None, :] - f[:, None]), axis=1) / sp.m


def integrate(sp: FiniteEnergySpace, f) -> float:
    """Integral of ``f`` against ``m``."""
    return float(sp.m @ _as_vector(sp, f))


def check_density(sp: FiniteEnergySpace, rho, tol: float = 1e-10) -> np.ndarray:
    """Validate a probability density w.r.t. ``m`` and return it as an array."""
    rho = _as_vector(sp, rho, "rho")
    if np.any(rho < 0):
        i = int(np.flatnonzero(rho < 0)[0])
        raise ValueError(f"density is negative at {i}: {rho[i]}")
    mass = integrate(sp, rho)
    if abs(mass - 1.0) > tol:
        raise ValueError(f"density has mass {mass!r}, expected 1")
    return rho


def density_to_mass(sp: FiniteEnergySpace, rho) -> np.ndarray:
    return sp.m * _as_vector(sp, rho, "rho")


def mass_to_density(sp: FiniteEnergySpace, sigma) -> np.ndarray:
    return _as_vector(sp, sigma, "sigma") / sp.m


def random_space(rng: np.random.Generator, n: int, density: float = 0.5,
                 connected: bool = True) -> FiniteEnergySpace:
    """Random space for property tests; ``connected`` adds a spanning path."""
    m = rng.uniform(0.2, 1.0, n)
    mask = np.triu(rng.uniform(size=(n, n)) < density, 1)
    if connected and n > 1:
        perm = rng.permutation(n)
        mask[np.minimum(perm[:-1], perm[1:]), np.maximum(perm[:-1], perm[1:])] = True
    w = np.where(mask, rng.uniform(0.1, 2.0, (n, n)), 0.0)
    w = w + w.T
    return FiniteEnergySpace(m, w, name=f"random{n}")


def random_density(sp: FiniteEnergySpace, rng: np.random.Generator,
                   floor: float = 0.0) -> np.ndarray:
    """Density with ``rho >= floor`` drawn from a flat Dirichlet on masses."""
    sigma = rng.dirichlet(np.ones(sp.n))
    rho = sigma / sp.m
    if floor > 0:
        if floor >= 1:
            raise ValueError("floor must be below 1")
        rho = floor + (1 - floor) * rho
    return rho
