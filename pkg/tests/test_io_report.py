import json
import math

import numpy as np
import pytest

from mmlab.certify import CertifiedInterval, CrossedBoundsError
from mmlab.io import csv_text, decode_float, dumps, encode_float, to_jsonable
from mmlab.report import Report


@pytest.mark.parametrize("x, enc", [(math.inf, "inf"), (-math.inf, "-inf"), (1.5, 1.5)])
def test_float_encoding_round_trip(x, enc):
    assert encode_float(x) == enc
    assert decode_float(enc) == x


def test_decode_rejects_unknown_strings():
    with pytest.raises(ValueError):
        decode_float("infinity-ish")


def test_jsonable_handles_numpy_and_nesting():
    obj = {"a": np.array([1.0, np.inf]), "b": (np.int64(3), np.bool_(True)), 2: np.float32(0.5)}
    out = to_jsonable(obj)
    assert out == {"a": [1.0, "inf"], "b": [3, True], "2": 0.5}
    json.dumps(out, allow_nan=False)


def test_dumps_is_deterministic_with_sorted_keys():
    assert dumps({"b": 1, "a": 2}) == dumps({"a": 2, "b": 1})
    assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')


def test_csv_infinity_uses_empty_cell_and_flag():
    text = csv_text(["x", "y"], [(1.0, "p"), (math.inf, "q")])
    lines = text.splitlines()
    assert lines[0] == "x,y,x_inf"
    assert lines[1] == "1.0,p,false"
    assert lines[2] == ",q,true"


def test_report_fields_and_pass_logic():
    rep = Report("demo", {"k": 1}, [0.1, 0.2], [-1.0, 1e-9], tolerance=1e-8)
    assert rep.passed and rep.max_violation == 1e-9
    d = rep.to_dict()
    assert set(d) >= {"check", "params", "grid", "residuals", "max_violation", "pass"}
    assert not Report("demo", {}, [0], [1.0]).passed
    assert Report("demo", {}, [], []).passed
    assert "PASS" in rep.line()
    assert rep.to_csv().splitlines()[0] == "grid,residual,grid_inf,residual_inf"


def test_report_serializes_infinite_residuals():
    rep = Report("demo", {}, ["a"], [math.inf])
    assert rep.to_dict()["max_violation"] == "inf"
    assert rep.to_csv().splitlines()[1] == "a,,true"


def test_certified_interval_validation():
    iv = CertifiedInterval(0.9, 1.1)
    assert 1.0 in iv and iv.width == pytest.approx(0.2)
    assert iv.squared().lower == pytest.approx(0.81)
    assert CertifiedInterval.infinite().width == 0.0
    assert CertifiedInterval(1.0, math.inf).mid == math.inf
    with pytest.raises(CrossedBoundsError):
        CertifiedInterval(2.0, 1.0)
    with pytest.raises(ValueError):
        CertifiedInterval(math.nan, 1.0)
    assert CertifiedInterval.exact(2.0).to_dict()["upper"] == 2.0
