"""JSON and CSV serialization shared by the library and the CLI.

JSON schema (informal, validated by the CLI against CONFIG_SCHEMA):

  shift:    {"preset": "full-2" | "full-3" | "golden-mean"}
            or {"alphabet_size": int, "allowed": [[0/1, ...], ...]}
  function: {"constant": float}
            or {"indicator": "word"}            (word: digit string)
            or {"values": {"word": float, ...}, "role": "observable"}
  measure:  {"type": "parry"}
            or {"type": "bernoulli", "p": [floats]}
            or {"type": "markov", "transition": [[...]], "order": int}
            or {"type": "equilibrium", "potential": <function>}
  model:    {"alpha","beta","gamma","lam1","lam2","lam3","roof_base","roof_cap"}

Curve CSV schema (fixed column order): level label ("a" or "s"), "value",
"method", "residual"; floats printed with 17 significant digits so parsing
round-trips exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os

import numpy as np

from .errors import SchemaMismatch
from .functions import LocallyConstantFunction, constant, from_dict, indicator
from .measures import MarkovMeasure, bernoulli_measure, markov_measure, parry_measure
from .sft import SftGraph, full_shift, golden_mean_shift, validate_sft


def float17(x: float) -> str:
    return format(float(x), ".17g")


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples for json.dumps."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, floats at 17 significant digits."""

    def _canon(o):
        if isinstance(o, dict):
            return {str(k): _canon(v) for k, v in sorted(o.items())}
        if isinstance(o, (list, tuple)):
            return [_canon(v) for v in o]
        if isinstance(o, float):
            return float(float17(o))
        return o

    return json.dumps(_canon(jsonable(obj)), sort_keys=True, separators=(",", ":"))


def payload_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def atomic_write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


# -- shifts ---------------------------------------------------------------

_PRESETS = {
    "full-2": lambda: full_shift(2),
    "full-3": lambda: full_shift(3),
    "golden-mean": golden_mean_shift,
}


def shift_from_json(spec: dict) -> SftGraph:
    if "preset" in spec:
        name = spec["preset"]
        if name not in _PRESETS:
            raise SchemaMismatch(f"unknown shift preset {name!r}")
        return _PRESETS[name]()
    return validate_sft(np.array(spec["allowed"], dtype=bool))


def shift_to_json(sft: SftGraph) -> dict:
    return {
        "alphabet_size": sft.alphabet_size,
        "allowed": [[int(v) for v in row] for row in sft.allowed],
        "transitive": sft.transitive,
        "mixing": sft.mixing,
    }


def _parse_word(text: str) -> tuple[int, ...]:
    return tuple(int(c) for c in str(text))


def function_from_json(spec: dict, sft: SftGraph) -> LocallyConstantFunction:
    role = spec.get("role", "observable")
    if "constant" in spec:
        return constant(sft, float(spec["constant"]), role=role)
    if "indicator" in spec:
        return indicator(sft, _parse_word(spec["indicator"]))
    if "values" in spec:
        table = {_parse_word(w): float(v) for w, v in spec["values"].items()}
        return from_dict(sft, table, role=role)
    raise SchemaMismatch("function spec needs 'constant', 'indicator' or 'values'")


def function_to_json(f: LocallyConstantFunction) -> dict:
    return {
        "order": f.order,
        "role": f.role,
        "values": {"".join(map(str, w)): float(v) for w, v in zip(f.words, f.values)},
    }


def measure_from_json(spec: dict, sft: SftGraph) -> MarkovMeasure:
    kind = spec.get("type")
    if kind == "parry":
        return parry_measure(sft)
    if kind == "bernoulli":
        return bernoulli_measure(sft, np.array(spec["p"], dtype=float))
    if kind == "markov":
        return markov_measure(sft, np.array(spec["transition"], dtype=float), order=spec.get("order", 1))
    if kind == "equilibrium":
        from .thermo import equilibrium_state

        psi = function_from_json(spec["potential"], sft)
        return equilibrium_state(sft, psi).measure
    raise SchemaMismatch(f"unknown measure type {kind!r}")


def measure_to_json(m: MarkovMeasure) -> dict:
    return {
        "order": m.order,
        "states": ["".join(map(str, w)) for w in m.states],
        "transition": [[float(v) for v in row] for row in m.transition],
        "stationary": [float(v) for v in m.stationary],
        "ergodic": m.ergodic,
    }


def model_from_json(spec: dict):
    from .lorenz import REFERENCE_PARAMS, validate_model

    params = dict(REFERENCE_PARAMS)
    params.update({k: float(v) for k, v in spec.items()})
    return validate_model(**params)


def model_to_json(model) -> dict:
    return {
        "alpha": model.alpha,
        "beta": model.beta,
        "gamma": model.gamma,
        "lam1": model.lam1,
        "lam2": model.lam2,
        "lam3": model.lam3,
        "roof_base": model.roof_base,
        "roof_cap": model.roof_cap,
    }


def write_symbols(path: str, symbols) -> None:
    """Plain-text export of a symbol sequence (one line of digits)."""
    atomic_write_text(path, "".join(str(int(s)) for s in symbols) + "\n")


# -- curve CSV -------------------------------------------------------------


def curve_rows(curve, label: str, residuals=None) -> list[dict]:
    res = residuals
    if res is None:
        res = curve.residuals if curve.residuals is not None else np.zeros_like(curve.values)
    return [
        {
            label: float(a),
            "value": float(v),
            "method": curve.method,
            "residual": float(r),
        }
        for a, v, r in zip(curve.levels, curve.values, res)
    ]


def write_curve_csv(path: str, rows: list[dict], label: str) -> None:
    """Write spectrum/rate rows with the fixed column schema."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([label, "value", "method", "residual"])
    for row in rows:
        writer.writerow(
            [float17(row[label]), float17(row["value"]), row["method"], float17(row["residual"])]
        )
    atomic_write_text(path, buf.getvalue())


def read_curve_csv(path: str):
    """Parse a curve CSV; raises SchemaMismatch on wrong header or no data."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file") from None
        if len(header) != 4 or header[1] != "value" or header[2] != "method" or header[
            3
        ] != "residual" or header[0] not in ("a", "s"):
            raise SchemaMismatch(f"{path}: header {header} is not a curve schema")
        label = header[0]
        rows = []
        for line in reader:
            if len(line) != 4:
                raise SchemaMismatch(f"{path}: malformed row {line}")
            try:
                rows.append(
                    {
                        label: float(line[0]),
                        "value": float(line[1]),
                        "method": line[2],
                        "residual": float(line[3]),
                    }
                )
            except ValueError as exc:
                raise SchemaMismatch(f"{path}: non-numeric row {line}") from exc
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    return label, rows
