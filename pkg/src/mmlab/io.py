"""JSON/CSV helpers shared by every module.

JSON has no infinity, so +inf is written as the string ``"inf"`` (and -inf as
``"-inf"``). CSV cells holding an infinite value are left empty and a companion
boolean column ``<name>_inf`` carries the flag.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def encode_float(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def decode_float(x) -> float:
    if isinstance(x, str):
        if x in ("inf", "+inf", "Infinity"):
            return math.inf
        if x in ("-inf", "-Infinity"):
            return -math.inf
        if x == "nan":
            return math.nan
        raise ValueError(f"unexpected float string {x!r}")
    return float(x)


def to_jsonable(obj):
    """Recursively convert numpy arrays/scalars and infinities for ``json``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return encode_float(obj)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def from_jsonable_matrix(rows) -> np.ndarray:
    return np.array([[decode_float(x) for x in row] for row in rows], dtype=float)


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed float repr)."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def distance_matrix_to_json(d: np.ndarray) -> dict:
    return {"d": to_jsonable(np.asarray(d, dtype=float))}


def distance_matrix_from_json(data: dict) -> np.ndarray:
    return from_jsonable_matrix(data["d"])


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """CSV with the empty-cell convention for infinite floats.

    Every float column gets a companion ``<name>_inf`` column.
    """
    rows = [list(r) for r in rows]
    float_cols = [k for k in range(len(header))
                  if any(isinstance(r[k], (float, np.floating)) for r in rows)]
    out_header = list(header) + [f"{header[k]}_inf" for k in float_cols]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(out_header)
    for r in rows:
        cells = []
        for v in r:
            if isinstance(v, (float, np.floating)):
                cells.append("" if math.isinf(v) else repr(float(v)))
            else:
                cells.append(v)
        flags = [str(bool(isinstance(r[k], (float, np.floating)) and math.isinf(r[k])))
                 .lower() for k in float_cols]
        writer.writerow(cells + flags)
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    Path(path).write_text(csv_text(header, rows))


def trajectory_csv(times, densities) -> str:
    rows = [(float(t), i, float(v))
            for t, rho in zip(times, densities) for i, v in enumerate(rho)]
    return csv_text(["t", "point", "density"], rows)


def plan_csv(plan: np.ndarray) -> str:
    rows = [(int(i), int(j), float(plan[i, j])) for i, j in zip(*np.nonzero(plan))]
    return csv_text(["i", "j", "mass"], rows)
