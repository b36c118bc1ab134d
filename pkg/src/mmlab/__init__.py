"""Numerical laboratory for transport distances, heat flows and curvature on finite spaces."""

from .builders import build_space, mehler_oracle, ou_grid, two_point
from .certify import CertifiedInterval
from .heat import SpectralSemigroup, heat_apply
from .report import Report
from .space import FiniteEnergySpace, energy, gamma, laplacian

__all__ = ["CertifiedInterval", "FiniteEnergySpace", "Report", "SpectralSemigroup",
           "build_space", "energy", "gamma", "heat_apply", "laplacian", "mehler_oracle",
           "ou_grid", "two_point"]
__version__ = "0.1.0"
