"""Certified lower/upper bound pairs returned by every variational solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


class CrossedBoundsError(ValueError):
    """Lower bound exceeds upper bound beyond tolerance."""


@dataclass(frozen=True)
class CertifiedInterval:
    """``lower <= true value <= upper``, each side backed by a witness.

    ``lower_certificate``/``upper_certificate`` hold whatever object proves the
    bound (a feasible potential, a curve, dual multipliers). ``flagged`` marks
    results from solvers that stopped before reaching their tolerance; the
    bounds remain valid but may be loose.
    """

    lower: float
    upper: float
    lower_certificate: Any = field(default=None, repr=False, compare=False)
    upper_certificate: Any = field(default=None, repr=False, compare=False)
    flagged: bool = False
    note: str = ""

    def __post_init__(self):
        lo, up = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(up):
            raise ValueError("certified bounds must not be NaN")
        if lo > up + 1e-9 * (1 + abs(up) if math.isfinite(up) else 1):
            raise CrossedBoundsError(f"crossed bounds: lower={lo!r} > upper={up!r}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def exact(cls, value: float, certificate=None) -> "CertifiedInterval":
        return cls(value, value, certificate, certificate)

    @classmethod
    def infinite(cls, note: str = "") -> "CertifiedInterval":
        return cls(math.inf, math.inf, note=note)

    @property
    def width(self) -> float:
        if math.isinf(self.upper) and math.isinf(self.lower):
            return 0.0
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        if math.isinf(self.upper):
            return self.upper if math.isinf(self.lower) else math.inf
        return 0.5 * (self.lower + self.upper)

    def __contains__(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def squared(self) -> "CertifiedInterval":
        """Interval for the square of a nonnegative quantity."""
        lo = max(self.lower, 0.0)
        return CertifiedInterval(lo * lo, self.upper * self.upper,
                                 self.lower_certificate, self.upper_certificate,
                                 self.flagged, self.note)

    def sqrt(self) -> "CertifiedInterval":
        return CertifiedInterval(math.sqrt(max(self.lower, 0.0)),
                                 math.sqrt(max(self.upper, 0.0)),
                                 self.lower_certificate, self.upper_certificate,
                                 self.flagged, self.note)

    def to_dict(self) -> dict:
        from .io import encode_float
        return {"lower": encode_float(self.lower), "upper": encode_float(self.upper),
                "flagged": self.flagged, "note": self.note}
