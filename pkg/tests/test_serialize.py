import json
import math

import numpy as np
import pytest

from shiftlab.errors import SchemaMismatch
from shiftlab.functions import indicator
from shiftlab.measures import measure_dstar
from shiftlab.serialize import (
    canonical_json,
    curve_rows,
    float17,
    function_from_json,
    function_to_json,
    jsonable,
    measure_from_json,
    measure_to_json,
    model_from_json,
    model_to_json,
    payload_hash,
    read_curve_csv,
    shift_from_json,
    shift_to_json,
    write_curve_csv,
)
from shiftlab.sft import full_shift, golden_mean_shift
from shiftlab.thermo import legendre_spectrum


def test_float17_round_trips():
    for x in (1 / 3, math.pi, 0.1, 2.0**-52, 1e300):
        assert float(float17(x)) == x


def test_canonical_json_is_stable():
    a = canonical_json({"b": [1.0, {"x": 0.1}], "a": np.float64(0.25)})
    b = canonical_json({"a": 0.25, "b": [1.0, {"x": 0.1}]})
    assert a == b
    assert payload_hash({"v": 1.5}) == payload_hash({"v": 1.5})


def test_shift_round_trip():
    for spec in ({"preset": "golden-mean"}, {"alphabet_size": 2, "allowed": [[1, 1], [1, 0]]}):
        sft = shift_from_json(spec)
        again = shift_from_json(shift_to_json(sft))
        assert np.array_equal(sft.allowed, again.allowed)


def test_function_round_trip():
    sft = golden_mean_shift()
    f = indicator(sft, (0, 1))
    g = function_from_json(function_to_json(f), sft)
    assert g.order == f.order
    assert np.array_equal(g.values, f.values)


def test_measure_specs():
    sft = full_shift(2)
    b = measure_from_json({"type": "bernoulli", "p": [0.25, 0.75]}, sft)
    assert b.stationary[1] == 0.75
    eq = measure_from_json(
        {"type": "equilibrium", "potential": {"indicator": "1"}}, sft
    )
    p = math.exp(1) / (1 + math.exp(1))
    assert eq.transition[0, 1] == pytest.approx(p, abs=1e-12)
    parry = measure_from_json({"type": "parry"}, golden_mean_shift())
    rebuilt = measure_from_json(
        {"type": "markov", "transition": measure_to_json(parry)["transition"]},
        golden_mean_shift(),
    )
    assert measure_dstar(parry, rebuilt, depth=6) < 1e-12


def test_model_round_trip():
    m = model_from_json({"alpha": 0.8})
    assert m.alpha == 0.8
    again = model_from_json(model_to_json(m))
    assert again == m


def test_curve_csv_round_trip(tmp_path):
    sft = full_shift(2)
    curve = legendre_spectrum(sft, indicator(sft, (1,)), [0.25, 0.5, 0.75])
    rows = curve_rows(curve, "a")
    path = tmp_path / "curve.csv"
    write_curve_csv(str(path), rows, "a")
    label, parsed = read_curve_csv(str(path))
    assert label == "a"
    assert [r["a"] for r in parsed] == [0.25, 0.5, 0.75]
    assert parsed[1]["value"] == curve.values[1]  # 17 digits round-trip exactly


def test_curve_csv_schema_mismatch(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(SchemaMismatch):
        read_curve_csv(str(empty))
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    with pytest.raises(SchemaMismatch):
        read_curve_csv(str(bad))
    headers_only = tmp_path / "head.csv"
    headers_only.write_text("a,value,method,residual\n")
    with pytest.raises(SchemaMismatch):
        read_curve_csv(str(headers_only))


def test_jsonable_handles_numpy():
    out = jsonable({"a": np.arange(3), "b": np.float32(1.5), "c": np.bool_(True)})
    assert out == {"a": [0, 1, 2], "b": 1.5, "c": True}
    json.dumps(out)
