"""Uniform report record for every checker."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .io import csv_text, to_jsonable


@dataclass
class Report:
    """Outcome of one check.

    ``residuals`` are signed: positive entries are violations of the checked
    inequality (or absolute errors for identities). ``max_violation`` is the
    largest residual, and ``passed`` compares it against ``tolerance``.
    """

    check: str
    params: dict
    grid: list
    residuals: list
    tolerance: float = 0.0
    extra: dict = field(default_factory=dict)
    passed: bool | None = None

    def __post_init__(self):
        self.grid = [float(g) if isinstance(g, (int, float, np.floating, np.integer))
                     else g for g in self.grid]
        self.residuals = [float(r) for r in np.asarray(self.residuals, dtype=float).ravel()]
        if self.passed is None:
            self.passed = bool(self.max_violation <= self.tolerance)

    @property
    def max_violation(self) -> float:
        if not self.residuals:
            return -math.inf
        return max(self.residuals)

    def to_dict(self) -> dict[str, Any]:
        return to_jsonable({
            "check": self.check,
            "params": self.params,
            "grid": self.grid,
            "residuals": self.residuals,
            "max_violation": self.max_violation if self.residuals else None,
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
            "extra": self.extra,
        })

    def to_csv(self) -> str:
        rows = [(g if isinstance(g, str) else float(g), float(r))
                for g, r in zip(self.grid, self.residuals)]
        return csv_text(["grid", "residual"], rows)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        mv = self.max_violation if self.residuals else float("nan")
        return f"[{status}] {self.check}: max_violation={mv:.3e} tol={self.tolerance:.1e}"
