"""Experiment orchestration: declarative configs, caching, reports, plots.

Subcommands: ``run <config.json>``, ``plot <curve.csv>``,
``validate <config.json>``, ``cache ls``, ``cache clear``. Exit codes:
0 ok, 2 gate failed (report still written), 3 invalid config.

Reports are reproducible: rerunning a config produces a bit-identical
numerical payload (hash recorded in the report), and cached runs replay
the stored payload. Parallelism is a config field, never ambient state;
every randomized experiment must carry an explicit seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .errors import ConfigInvalid, GateFailed, ShiftLabError
from .serialize import (
    atomic_write_text,
    canonical_json,
    float17,
    function_from_json,
    jsonable,
    measure_from_json,
    model_from_json,
    model_to_json,
    payload_hash,
    shift_from_json,
    write_curve_csv,
)

KINDS = (
    "entropy",
    "pressure",
    "spectrum",
    "flow-spectrum",
    "lorenz",
    "ldp-level1",
    "ldp-level2",
    "gibbs-audit",
    "approx",
)

_SHIFT_SCHEMA = {
    "type": "object",
    "properties": {
        "preset": {"enum": ["full-2", "full-3", "golden-mean"]},
        "alphabet_size": {"type": "integer", "minimum": 1},
        "allowed": {"type": "array"},
    },
    "additionalProperties": False,
}

_FUNCTION_SCHEMA = {
    "type": "object",
    "properties": {
        "constant": {"type": "number"},
        "indicator": {"type": "string"},
        "values": {"type": "object"},
        "role": {"type": "string"},
    },
    "additionalProperties": False,
}

_MEASURE_SCHEMA = {
    "type": "object",
    "properties": {
        "type": {"enum": ["parry", "bernoulli", "markov", "equilibrium"]},
        "p": {"type": "array"},
        "transition": {"type": "array"},
        "order": {"type": "integer", "minimum": 0},
        "potential": _FUNCTION_SCHEMA,
    },
    "required": ["type"],
    "additionalProperties": False,
}

_SORTED_GRID = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 1,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(KINDS)},
        "system": _SHIFT_SCHEMA,
        "model": {"type": "object"},
        "parameters": {"type": "object"},
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
        "plot": {"type": "boolean"},
        "workers": {"type": "integer", "minimum": 1},
    },
    "required": ["kind", "output_dir"],
    "additionalProperties": False,
}

_RANDOMIZED = {"ldp-level1", "ldp-level2"}


def validate_config(config: dict) -> None:
    """Schema-validate a config; ConfigInvalid carries a JSON-pointer."""
    validator = Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigInvalid(pointer, err.message)
    params = config.get("parameters", {})
    if config["kind"] in _RANDOMIZED and "seed" not in config:
        raise ConfigInvalid("/seed", "randomized experiments require an explicit seed")
    for grid_key in ("a_grid", "s_grid", "delta_grid"):
        if grid_key in params:
            grid = params[grid_key]
            if not isinstance(grid, list) or not grid:
                raise ConfigInvalid(f"/parameters/{grid_key}", "grid must be a nonempty array")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigInvalid(
                    f"/parameters/{grid_key}", "grid must be strictly increasing"
                )


# -- runners ----------------------------------------------------------------


def _run_entropy(config: dict) -> tuple[dict, dict]:
    from .measures import markov_entropy, parry_measure
    from .sft import topological_entropy

    sft = shift_from_json(config.get("system", {"preset": "full-2"}))
    h_top = topological_entropy(sft)
    outputs = {
        "topological_entropy": h_top,
        "transitive": sft.transitive,
        "mixing": sft.mixing,
    }
    gates = {}
    if sft.transitive:
        h_parry = markov_entropy(parry_measure(sft))
        outputs["parry_entropy"] = h_parry
        gates["parry_matches_topological"] = abs(h_parry - h_top) <= 1e-10
    return outputs, gates


def _run_pressure(config: dict) -> tuple[dict, dict]:
    from .thermo import equilibrium_state, pressure

    sft = shift_from_json(config.get("system", {"preset": "full-2"}))
    params = config.get("parameters", {})
    psi = function_from_json(params["potential"], sft)
    value = pressure(sft, psi)
    outputs = {"pressure": value}
    gates = {}
    if sft.transitive:
        eq = equilibrium_state(sft, psi)
        outputs["variational_residual"] = eq.variational_residual
        gates["variational_identity"] = eq.variational_residual <= 1e-8
    return outputs, gates


def _run_spectrum(config: dict, out_dir: str) -> tuple[dict, dict, list]:
    from .sft import topological_entropy
    from .thermo import constrained_entropy_oracle, legendre_spectrum
    from .serialize import curve_rows

    sft = shift_from_json(config.get("system", {"preset": "full-2"}))
    params = config.get("parameters", {})
    g = function_from_json(params["observable"], sft)
    grid = np.array(params["a_grid"], dtype=float)
    curve = legendre_spectrum(sft, g, grid)
    rows = curve_rows(curve, "a")
    gates = {"concave": curve.concavity_defect() <= 1e-9, "nonnegative": bool(curve.values.min() >= 0.0)}
    outputs = {
        "levels": curve.levels,
        "values": curve.values,
        "a_min": curve.a_min,
        "a_max": curve.a_max,
        "method": curve.method,
    }
    if params.get("oracle", False):
        oracle_vals = np.array(
            [constrained_entropy_oracle(sft, g, float(a)) for a in curve.levels]
        )
        residual = np.abs(oracle_vals - curve.values)
        outputs["oracle_values"] = oracle_vals
        outputs["oracle_max_gap"] = float(residual.max())
        gates["legendre_oracle_agreement"] = bool(residual.max() <= 1e-6)
        rows = curve_rows(curve, "a", residuals=residual)
        for a, v, r in zip(curve.levels, oracle_vals, residual):
            rows.append({"a": float(a), "value": float(v), "method": "oracle", "residual": float(r)})
    peak_gap = abs(float(curve.values.max()) - topological_entropy(sft))
    outputs["peak_entropy_gap"] = peak_gap
    artifacts = [("spectrum.csv", rows, "a")]
    return outputs, gates, artifacts


def _run_flow_spectrum(config: dict, out_dir: str) -> tuple[dict, dict, list]:
    from .suspension import (
        SuspensionSystem,
        flow_level_spectrum,
        flow_topological_entropy,
    )
    from .serialize import curve_rows

    sft = shift_from_json(config.get("system", {"preset": "full-2"}))
    params = config.get("parameters", {})
    roof = function_from_json({**params["roof"], "role": "roof"}, sft)
    phi = function_from_json(params["observable"], sft)
    susp = SuspensionSystem(base=sft, roof=roof)
    grid = np.array(params["a_grid"], dtype=float)
    curve = flow_level_spectrum(susp, phi, grid)
    h_flow = flow_topological_entropy(susp)
    outputs = {
        "levels": curve.levels,
        "values": curve.values,
        "a_min": curve.a_min,
        "a_max": curve.a_max,
        "flow_topological_entropy": h_flow,
    }
    gates = {
        "spectrum_below_flow_entropy": bool(curve.values.max() <= h_flow + 1e-8),
    }
    artifacts = [("flow_spectrum.csv", curve_rows(curve, "a"), "a")]
    return outputs, gates, artifacts


def _run_lorenz(config: dict, out_dir: str) -> tuple[dict, dict, list]:
    from .lorenz import (
        branch_intervals,
        itinerary,
        orbit,
        poincare_step,
        reference_model,
    )
    from .measures import stream_rng
    from .serialize import model_from_json

    params = config.get("parameters", {})
    model = model_from_json(config.get("model", {})) if config.get("model") else reference_model()
    outputs: dict = {"model": model_to_json(model)}
    gates: dict = {}
    fp = (1.0, -model.gamma / (1.0 - model.beta))
    image = poincare_step(model, fp)
    fp_err = abs(image[0] - fp[0]) + abs(image[1] - fp[1])
    outputs["fixed_point"] = [fp[0], fp[1]]
    outputs["fixed_point_error"] = fp_err
    gates["fixed_point_invariant"] = fp_err <= 1e-12
    depth = int(params.get("depth", 12))
    n_points = int(params.get("round_trips", 10_000))
    seed = int(config.get("seed", 20260301))
    rng = stream_rng(seed, 0)
    xs = rng.uniform(-1.0, 1.0, n_points)
    bits, lo, hi = branch_intervals(model, depth)
    # map a word to its interval index by binary code
    codes = (bits * (2 ** np.arange(depth - 1, -1, -1))).sum(axis=1)
    lut_lo = np.empty(2**depth)
    lut_hi = np.empty(2**depth)
    lut_lo[codes] = lo
    lut_hi[codes] = hi
    bad = 0
    for x in xs:
        w = itinerary(model, float(x), depth)
        code = int((w * (2 ** np.arange(depth - 1, -1, -1))).sum())
        if not (lut_lo[code] - 1e-12 <= x <= lut_hi[code] + 1e-12):
            bad += 1
    outputs["round_trip_failures"] = bad
    outputs["max_cylinder_length"] = float((hi - lo).max())
    gates["round_trips_consistent"] = bad == 0
    orbit_spec = params.get("orbit")
    artifacts = []
    if orbit_spec:
        xs_o, ys_o, perturbed = orbit(
            model,
            (float(orbit_spec["x0"]), float(orbit_spec["y0"])),
            int(orbit_spec["n"]),
        )
        sym = (xs_o > 0).astype(int)
        roof_vals = model.roof(xs_o)
        rows = [
            {"k": k, "x": float(xs_o[k]), "y": float(ys_o[k]), "symbol": int(sym[k]), "roof": float(roof_vals[k])}
            for k in range(len(xs_o))
        ]
        outputs["orbit_perturbed"] = perturbed
        artifacts.append(("orbit.csv", rows, None))
    return outputs, gates, artifacts


def _run_ldp_level1(config: dict, out_dir: str) -> tuple[dict, dict, list]:
    from .ldp import exact_deviation_prob, level1_rate, mc_deviation_prob

    sft = shift_from_json(config.get("system", {"preset": "full-2"}))
    params = config.get("parameters", {})
    m = measure_from_json(params["measure"], sft)
    g = function_from_json(params["observable"], sft)
    grid = np.array(params["s_grid"], dtype=float)
    curve = level1_rate(m, g, grid)
    outputs = {
        "levels": curve.levels,
        "values": curve.values,
        "mean": curve.mean,
        "cgf_q": curve.cgf_q,
        "cgf_values": curve.cgf_values,
    }
    gates = {
        "rate_vanishes_at_mean": bool(
            curve.values[np.argmin(np.abs(curve.levels - curve.mean))] <= 1e-10
            if np.abs(curve.levels - curve.mean).min() < 1e-9
            else True
        ),
        "rate_convex": curve.convexity_defect() <= 1e-9,
    }
    rows = [
        {"s": float(s), "value": float(v), "method": "legendre", "residual": 0.0}
        for s, v in zip(curve.levels, curve.values)
    ]
    artifacts = [("rate_curve.csv", rows, "s")]
    if "dp" in params:
        n = int(params["dp"]["n"])
        c = float(params["dp"]["threshold"])
        outputs["dp_probability"] = exact_deviation_prob(m, g, n, c)
    if "mc" in params:
        mc = params["mc"]
        report = mc_deviation_prob(
            m,
            g,
            int(mc["n"]),
            float(mc["threshold"]),
            int(mc["trials"]),
            int(config["seed"]),
            rate=curve,
        )
        outputs["mc_report"] = report.to_dict()
        if report.exact_probability is not None and not report.zero_hits:
            lo, hi = report.mc_interval
            gates["mc_covers_exact"] = bool(lo <= report.exact_probability <= hi)
    return outputs, gates, artifacts


def _run_ldp_level2(config: dict, out_dir: str) -> tuple[dict, dict, list]:
    from .ldp import BallConstraint, level2_ball_rate, level2_mc_test

    sft = shift_from_json(config.get("system", {"preset": "full-2"}))
    params = config.get("parameters", {})
    m = measure_from_json(params["measure"], sft)
    psi = function_from_json(params["potential"], sft)
    constraints = [
        BallConstraint(
            word=tuple(int(c) for c in str(b["word"])),
            center=float(b["center"]),
            delta=float(b["delta"]),
        )
        for b in params["ball"]
    ]
    closed = level2_ball_rate(sft, psi, constraints, closed=True)
    opened = level2_ball_rate(sft, psi, constraints, closed=False)
    outputs = {
        "closed_ball_rate": closed.value,
        "open_ball_rate": opened.value,
        "multipliers": list(closed.multipliers),
    }
    gates = {"open_not_below_closed": opened.value >= closed.value - 1e-9}
    if "n" in params and "trials" in params:
        report = level2_mc_test(
            m,
            sft,
            psi,
            constraints,
            int(params["n"]),
            int(params["trials"]),
            int(config["seed"]),
        )
        outputs["mc_report"] = report.to_dict()
        if report.slope_exponent is not None and np.isfinite(report.slope_exponent):
            tol = float(params.get("sandwich_tolerance", 0.06))
            lo = min(-closed.value, -opened.value) - tol
            hi = max(-closed.value, -opened.value) + tol
            gates["sandwich"] = bool(lo <= report.slope_exponent <= hi)
    return outputs, gates, []


def _run_gibbs_audit(config: dict, out_dir: str) -> tuple[dict, dict, list]:
    from .ldp import c_infinity_estimate, weak_gibbs_audit

    sft = shift_from_json(config.get("system", {"preset": "full-2"}))
    params = config.get("parameters", {})
    m = measure_from_json(params["measure"], sft)
    psi = function_from_json(params["potential"], sft)
    audit = weak_gibbs_audit(m, psi, int(params.get("n_max", 12)))
    delta_grid = params.get("delta_grid", [0.01, 0.02, 0.05])
    c_inf = c_infinity_estimate(audit, delta_grid)
    norm = audit.normalized_max()
    outputs = {
        "lengths": list(audit.lengths),
        "normalized_max_log_constant": [norm[n] for n in audit.lengths],
        "c_infinity": c_inf if c_inf > -np.inf else "-inf",
        "subexponential": audit.subexponential(),
    }
    gates = {}
    if params.get("expect_gibbs", False):
        gates["c_infinity_sentinel"] = c_inf == -np.inf
    return outputs, gates, []


def _run_approx(config: dict, out_dir: str) -> tuple[dict, dict, list]:
    from .approx import entropy_dense_approx, nested_horseshoe_sequence
    from .measures import cylinder_marginals, mixture_marginals
    from .sft import topological_entropy

    sft = shift_from_json(config.get("system", {"preset": "full-2"}))
    params = config.get("parameters", {})
    # the weak* metric is a modeling choice; reports name it explicitly
    outputs: dict = {
        "dstar_metric": "sum_k 2^-k A^-k cylinder variation (A = alphabet size)"
    }
    gates: dict = {}
    if "nested" in params:
        n_max = int(params["nested"]["n_max"])
        stages = nested_horseshoe_sequence(sft, n_max)
        entropies = [s.entropy() for s in stages]
        h_top = topological_entropy(sft)
        outputs["nested_entropies"] = entropies
        outputs["ambient_entropy"] = h_top
        gap_threshold = params["nested"].get("gap_threshold")
        if gap_threshold is not None:
            gates["entropy_gap_closes"] = bool(
                h_top - entropies[-1] < float(gap_threshold)
            )
        gates["entropies_monotone"] = all(
            b >= a - 1e-12 for a, b in zip(entropies, entropies[1:])
        )
    if "target" in params:
        target_spec = params["target"]
        depth = int(target_spec.get("depth", 3))
        components = []
        weights = []
        for comp in target_spec["mixture"]:
            weights.append(float(comp["weight"]))
            m = measure_from_json(
                {k: v for k, v in comp.items() if k != "weight"}, sft
            )
            components.append(cylinder_marginals(m, depth))
        target = mixture_marginals(components, weights)
        eps = float(params["epsilon"])
        witness, cert = entropy_dense_approx(target, sft, eps)
        outputs["certificate"] = {
            "order": cert.order,
            "eta": cert.eta,
            "dstar": cert.dstar,
            "entropy": cert.entropy,
            "reference_entropy": cert.reference_entropy,
        }
        gates["certificate_valid"] = bool(
            cert.dstar < eps and cert.entropy > cert.reference_entropy - eps
        )
        gates["witness_ergodic"] = witness.ergodic
    return outputs, gates, []


def run_experiment(config: dict, out_dir: str) -> tuple[dict, dict, list]:
    kind = config["kind"]
    if kind == "entropy":
        outputs, gates = _run_entropy(config)
        return outputs, gates, []
    if kind == "pressure":
        outputs, gates = _run_pressure(config)
        return outputs, gates, []
    if kind == "spectrum":
        return _run_spectrum(config, out_dir)
    if kind == "flow-spectrum":
        return _run_flow_spectrum(config, out_dir)
    if kind == "lorenz":
        return _run_lorenz(config, out_dir)
    if kind == "ldp-level1":
        return _run_ldp_level1(config, out_dir)
    if kind == "ldp-level2":
        return _run_ldp_level2(config, out_dir)
    if kind == "gibbs-audit":
        return _run_gibbs_audit(config, out_dir)
    if kind == "approx":
        return _run_approx(config, out_dir)
    raise ConfigInvalid("/kind", f"unknown kind {kind!r}")


# -- caching and report assembly --------------------------------------------


def cache_dir_for(config: dict) -> str:
    env = os.environ.get("SHIFTLAB_CACHE_DIR")
    if env:
        return env
    return os.path.join(config["output_dir"], ".cache")


def config_hash(config: dict) -> str:
    return payload_hash(config)


def _write_artifacts(out_dir: str, artifacts: list) -> list[str]:
    written = []
    for name, rows, label in artifacts:
        path = os.path.join(out_dir, name)
        if label is None:
            # generic table: fixed column order from the first row
            import csv as _csv
            import io as _io

            buf = _io.StringIO()
            writer = _csv.writer(buf, lineterminator="\n")
            cols = list(rows[0].keys())
            writer.writerow(cols)
            for row in rows:
                writer.writerow(
                    [
                        float17(row[c]) if isinstance(row[c], float) else row[c]
                        for c in cols
                    ]
                )
            atomic_write_text(path, buf.getvalue())
        else:
            write_curve_csv(path, rows, label)
        written.append(path)
    return written


def run(config: dict, use_cache: bool = True, emit_svg: bool | None = None) -> dict:
    """Execute (or replay) one experiment config; returns the report dict."""
    validate_config(config)
    out_dir = config["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    chash = config_hash(config)
    cdir = cache_dir_for(config)
    cache_path = os.path.join(cdir, f"{chash}.json")
    if use_cache and os.path.exists(cache_path):
        with open(cache_path, encoding="utf-8") as fh:
            report = json.load(fh)
        artifacts = [
            (name, rows, label) for name, rows, label in report.get("_artifacts", [])
        ]
        _write_artifacts(out_dir, artifacts)
        report["cache_hit"] = True
        _finalize(report, out_dir, config, emit_svg)
        return report
    t0 = time.monotonic()
    outputs, gates, artifacts = run_experiment(config, out_dir)
    wall = time.monotonic() - t0
    outputs = jsonable(outputs)
    report = {
        "config_hash": chash,
        "versions": {"shiftlab": __version__},
        "outputs": outputs,
        "gates": jsonable(gates),
        "wall_clock_s": wall,
        "payload_hash": payload_hash(outputs),
        "cache_hit": False,
        "_artifacts": jsonable(
            [[name, rows, label] for name, rows, label in artifacts]
        ),
    }
    _write_artifacts(out_dir, artifacts)
    os.makedirs(cdir, exist_ok=True)
    atomic_write_text(cache_path, canonical_json(report))
    _finalize(report, out_dir, config, emit_svg)
    return report


def _finalize(report: dict, out_dir: str, config: dict, emit_svg: bool | None) -> None:
    want_svg = config.get("plot", False) if emit_svg is None else emit_svg
    if want_svg:
        from .plotting import emit_plot

        for name, _, label in report.get("_artifacts", []):
            if label in ("a", "s"):
                emit_plot(
                    os.path.join(out_dir, name),
                    os.path.join(out_dir, name.replace(".csv", ".svg")),
                )
    public = {k: v for k, v in report.items() if not k.startswith("_")}
    atomic_write_text(
        os.path.join(out_dir, "report.json"), json.dumps(public, indent=2, sort_keys=True)
    )
    failed = [k for k, ok in report["gates"].items() if not ok]
    if failed:
        raise GateFailed(f"gates failed: {', '.join(sorted(failed))}")


# -- entry point -------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="shiftlab", description="symbolic-dynamics experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--no-cache", action="store_true")
    p_run.add_argument("--plot", action="store_true", help="also emit SVG figures")
    p_plot = sub.add_parser("plot", help="render a curve CSV to SVG")
    p_plot.add_argument("csv")
    p_plot.add_argument("-o", "--output")
    p_plot.add_argument("--title")
    p_val = sub.add_parser("validate", help="schema-check a config")
    p_val.add_argument("config")
    p_cache = sub.add_parser("cache", help="inspect or clear the result cache")
    p_cache.add_argument("action", choices=["ls", "clear"])
    p_cache.add_argument("--dir", default=None)
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
            report = run(config, use_cache=not args.no_cache, emit_svg=args.plot or None)
            print(
                f"ok kind={config['kind']} payload={report['payload_hash'][:16]} "
                f"cache_hit={report['cache_hit']}"
            )
            return 0
        if args.command == "plot":
            from .plotting import emit_plot

            out = args.output or args.csv.replace(".csv", ".svg")
            emit_plot(args.csv, out, title=args.title)
            print(f"wrote {out}")
            return 0
        if args.command == "validate":
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
            validate_config(config)
            print("config ok")
            return 0
        if args.command == "cache":
            cdir = args.dir or os.environ.get("SHIFTLAB_CACHE_DIR", ".cache")
            if args.action == "ls":
                if os.path.isdir(cdir):
                    for name in sorted(os.listdir(cdir)):
                        print(name)
                return 0
            if os.path.isdir(cdir):
                for name in os.listdir(cdir):
                    os.remove(os.path.join(cdir, name))
            return 0
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return 3
    except GateFailed as exc:
        print(f"gate failed: {exc}", file=sys.stderr)
        return 2
    except (ShiftLabError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
