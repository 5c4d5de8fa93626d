"""Command-line front end: ``spinlab COMMAND [CONFIG] [--out DIR] [--tolerance-profile P]``.

The configuration is read from the JSON file ``CONFIG`` or from stdin.  A JSON
report goes to stdout; bulk fields and CSV series are written under ``--out``.
Exit status: 0 all checks passed, 1 a check failed, 2 schema violation,
3 numerical failure, 4 unknown command.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from spinlab import __version__
from spinlab.cauchy import EvolutionConfig, evolve_dirac, plane_wave_solution
from spinlab.clifford import build_rep, clifford_residuals, rotation_path, spin_lift
from spinlab.config import (
    ConfigError,
    RunConfig,
    build_metric,
    build_one_form,
    build_spinor,
    complex_vector,
    evaluate_expression,
    expression_variables,
    load_config,
    metric_values,
    slice_spinor_values,
    validate_metric_spec,
    validate_one_form_spec,
)
from spinlab.constraints import InitialData, constraint_residual, wave_gauge_residual
from spinlab.edm import EDMParams, edm_residual, el_consistency, lagrangian, random_direction
from spinlab.errors import SpinlabError
from spinlab.grid import TorusGrid, field_to_json
from spinlab.metric import b_map_residuals, random_joinable_pairs
from spinlab.spinors import (
    SpinorField,
    SpinStructureTwist,
    beta_diagnostics,
    beta_transport,
    dirac_potential,
    dirac_pullback,
    dirac_pullback_conjugated,
    dirac_spectrum,
    flat_torus_spectrum,
    MetricPath,
    potential_form_gap,
    rep_for,
)
from spinlab.symbol import symbol_report

COMMANDS = (
    "clifford-check",
    "dirac-spectrum",
    "dirac-apply",
    "dirac-pullback",
    "beta-transport",
    "edm-residual",
    "lagrangian",
    "el-check",
    "constraints",
    "wave-gauge",
    "symbol",
    "evolve",
)

# thresholds checked by the reports; "strict" tightens each by a factor of ten
DEFAULT_TOLERANCES = {
    "clifford": 1e-12,
    "double_cover": 1e-10,
    "b_map": 1e-12,
    "beta": 1e-9,
    "spectrum": 5e-3,
    "potential_form": 1e-12,
    "pullback": 1e-3,
    "trivial_residual": 1e-13,
    "el_gap": 1e-3,
    "el_step_ratio": 0.5,
    "lagrangian": 1e-6,
    "wave_gauge_identity": 0.0,
    "symbol_dirac": 1e-8,
    "symbol_form": 1e-6,
    "evolution_error": 1e-6,
    "charge_drift": 1e-6,
}
PROFILES = {
    "default": DEFAULT_TOLERANCES,
    "strict": {k: v * 0.1 for k, v in DEFAULT_TOLERANCES.items()},
}

USAGE = "usage: spinlab {" + ",".join(COMMANDS) + "} [CONFIG] [--out DIR] [--tolerance-profile {strict,default}]"


# deterministic JSON with 17 significant digits


def _format(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_format(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_format(v, indent + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _format(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(obj, (complex, np.complexfloating)):
        return _format([float(obj.real), float(obj.imag)], indent)
    if isinstance(obj, np.ndarray):
        return _format(obj.tolist(), indent)
    return json.dumps(str(obj))


def dumps(obj) -> str:
    return _format(obj) + "\n"


class Report:
    def __init__(self, command: str, cfg: RunConfig, profile: str):
        self.command = command
        self.cfg = cfg
        self.profile = profile
        self.tol = PROFILES[profile]
        self.results: dict = {}
        self.checks: list[dict] = []
        self.files: list[str] = []

    def check(self, name: str, value: float, key: str, comparison: str = "<=") -> None:
        tol = self.tol[key]
        value = float(value)
        ok = value <= tol if comparison == "<=" else value >= tol
        self.checks.append({"name": name, "value": value, "tolerance": tol, "comparison": comparison, "passed": bool(ok and math.isfinite(value))})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "spinlab_version": __version__,
            "config_hash": self.cfg.config_hash(),
            "tolerance_profile": self.profile,
            "passed": self.passed,
            "checks": self.checks,
            "results": self.results,
            "files": self.files,
        }


class Outputs:
    def __init__(self, out: str | None, report: Report):
        self.dir = Path(out) if out else None
        self.report = report
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write_text(self, name: str, text: str) -> None:
        if self.dir is None:
            return
        (self.dir / name).write_text(text)
        self.report.files.append(name)

    def write_json(self, name: str, obj) -> None:
        self.write_text(name, dumps(obj))

    def write_csv(self, name: str, header: list[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v for v in row])
        self.write_text(name, buf.getvalue())


# option handling


def _options(cfg: RunConfig, allowed: dict) -> dict:
    opts = dict(cfg.options)
    opts.pop("spacetime", None)
    extra = sorted(set(opts) - set(allowed))
    if extra:
        raise ConfigError(f"unknown options {extra}; allowed: {sorted(allowed)}")
    out = dict(allowed)
    out.update(opts)
    return out


def _int_option(opts: dict, name: str, low: int = 0) -> int:
    v = opts[name]
    if not isinstance(v, int) or isinstance(v, bool) or v < low:
        raise ConfigError(f"option {name} must be an integer >= {low}")
    return v


def _float_option(opts: dict, name: str) -> float:
    v = opts[name]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ConfigError(f"option {name} must be a number")
    return float(v)


def _grid(cfg: RunConfig) -> TorusGrid:
    return TorusGrid(cfg.grid)


def _twist(cfg: RunConfig) -> SpinStructureTwist:
    return SpinStructureTwist(cfg.twist)


def _metric(cfg: RunConfig, spec=None):
    spec = cfg.metric if spec is None else validate_metric_spec(spec, cfg.dimension, "options.target_metric")
    return build_metric(spec, _grid(cfg), cfg.signature)


def _params(cfg: RunConfig) -> EDMParams:
    return EDMParams(tuple(cfg.params["lambda"]), tuple(cfg.params["q"]))


def _spinors(cfg: RunConfig, g, count: int | None = None) -> list[SpinorField]:
    rep = rep_for(g)
    psis = [build_spinor(s, g.grid, rep, _twist(cfg)) for s in cfg.spinors]
    if count is not None and len(psis) < count:
        raise ConfigError(f"this command needs at least {count} spinor spec(s)")
    return psis


def _potential(cfg: RunConfig, g) -> np.ndarray:
    return build_one_form(cfg.potential, g.grid, g.grid.m)


def _field_stats(values: np.ndarray) -> dict:
    return {"max_abs": float(np.max(np.abs(values), initial=0.0)), "rms": float(np.sqrt(np.mean(np.abs(values) ** 2))) if values.size else 0.0}


# commands


def cmd_clifford_check(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"max_dim": 6, "pairs": 1000, "seed": 0})
    max_dim = _int_option(opts, "max_dim", 1)
    pairs = _int_option(opts, "pairs", 1)
    reps = []
    anti = adj = 0.0
    for m in range(1, max_dim + 1):
        for s in range(m + 1):
            res = clifford_residuals(build_rep(m - s, s))
            reps.append({"r": m - s, "s": s, **res})
            anti = max(anti, res["anticommutator"])
            adj = max(adj, res["adjoint_relation"])
    rep_.results["representations"] = reps
    rep_.check("anticommutator_max", anti, "clifford")
    rep_.check("adjoint_relation_max", adj, "clifford")
    for m in (2, 3):
        rep = build_rep(m, 0)
        path = rotation_path(m, 0, 1, 2 * np.pi)
        lift = spin_lift(rep, path(1.0), path=path)
        res = float(np.max(np.abs(lift.Lambda + np.eye(rep.N))))
        rep_.results[f"double_cover_m{m}"] = res
        rep_.check(f"double_cover_m{m}", res, "double_cover")
    rng = np.random.default_rng(_int_option(opts, "seed"))
    for sig in ((2, 0), (3, 0), (1, 1), (3, 1)):
        G, H = random_joinable_pairs(rng, sig, pairs)
        res = b_map_residuals(G, H)
        rep_.results[f"b_map_{sig[0]}_{sig[1]}"] = res
        rep_.check(f"b_map_defining_{sig[0]}_{sig[1]}", res["defining_relation"], "b_map")
        rep_.check(f"b_map_inverse_{sig[0]}_{sig[1]}", res["inverse"], "b_map")


def cmd_dirac_spectrum(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"count": 16, "check_max_abs": None})
    count = _int_option(opts, "count", 1)
    g = _metric(cfg)
    tw = _twist(cfg)
    res = dirac_spectrum(g, tw, count)
    ev = res.eigenvalues
    rep_.results.update({"eigenvalues": ev, "asymmetry": res.asymmetry, "dimension": res.dimension, "discarded_doublers": res.discarded_doublers})
    rows = [[v] for v in ev]
    header = ["eigenvalue"]
    if cfg.metric["kind"] == "flat":
        exact = flat_torus_spectrum(g.grid.m, tw, float(np.max(np.abs(ev))) + 2.0)
        nearest = exact[np.argmin(np.abs(ev[:, None] - exact[None, :]), axis=1)]
        err = np.abs(ev - nearest)
        limit = opts["check_max_abs"]
        mask = np.ones(len(ev), bool) if limit is None else np.abs(ev) <= float(limit)
        # multiplicities: sorted magnitudes against the exact list
        mags = np.sort(np.abs(ev))
        exact_mags = np.sort(np.abs(exact))[: len(mags)]
        rep_.results["max_error_to_exact"] = float(np.max(err[mask], initial=0.0))
        rep_.results["max_magnitude_error"] = float(np.max(np.abs(mags - exact_mags)))
        rep_.check("flat_spectrum_error", rep_.results["max_error_to_exact"], "spectrum")
        rep_.check("flat_spectrum_magnitudes", rep_.results["max_magnitude_error"], "spectrum")
        header += ["exact", "error"]
        rows = [[v, e, d] for v, e, d in zip(ev, nearest, err)]
    out.write_csv("spectrum.csv", header, rows)


def cmd_dirac_apply(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    _options(cfg, {})
    g = _metric(cfg)
    psi = _spinors(cfg, g, 1)[0]
    A = _potential(cfg, g)
    q = cfg.params["q"][0] if cfg.params["q"] else 0.0
    D = dirac_potential(g, A, q, psi)
    rep_.results["input"] = _field_stats(psi.values)
    rep_.results["output"] = _field_stats(D.values)
    gap = potential_form_gap(g, A, q, psi)
    rep_.results["potential_form_gap"] = gap
    rep_.check("potential_form_relative_gap", gap["clifford_form_relative_difference"], "potential_form")
    out.write_json("dirac_apply.json", field_to_json(g.grid, D.values))


def cmd_dirac_pullback(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"target_metric": None, "samples": 8})
    if opts["target_metric"] is None:
        raise ConfigError("dirac-pullback needs options.target_metric")
    g, h = _metric(cfg), _metric(cfg, opts["target_metric"])
    psi = _spinors(cfg, g, 1)[0]
    local = dirac_pullback(g, h, psi).values
    conj = dirac_pullback_conjugated(g, h, psi, _int_option(opts, "samples", 1)).values
    gap = float(np.max(np.abs(local - conj)) / max(np.max(np.abs(conj)), 1e-300))
    rep_.results.update({"relative_gap": gap, "output": _field_stats(local)})
    rep_.check("pullback_relative_gap", gap, "pullback")
    out.write_json("dirac_pullback.json", field_to_json(g.grid, local))


def cmd_beta_transport(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"target_metric": None, "samples": 8, "vector": None, "seed": 0})
    if opts["target_metric"] is None:
        raise ConfigError("beta-transport needs options.target_metric")
    g, h = _metric(cfg), _metric(cfg, opts["target_metric"])
    psis = _spinors(cfg, g, 1)
    psi = psis[0]
    if len(psis) > 1:
        phi = psis[1]
    else:
        rng = np.random.default_rng(_int_option(opts, "seed"))
        phi = psi.with_values(rng.normal(size=psi.values.shape) + 1j * rng.normal(size=psi.values.shape))
    vec = opts["vector"]
    if vec is None:
        X = np.zeros(g.grid.shape + (g.grid.m,))
        X[..., 0] = 1.0
    else:
        if not isinstance(vec, list) or len(vec) != g.grid.m:
            raise ConfigError(f"options.vector must list {g.grid.m} expressions")
        X = np.stack([evaluate_expression(str(c), g.grid.coords()) for c in vec], axis=-1)
    samples = _int_option(opts, "samples", 1)
    diag = beta_diagnostics(g, h, psi, phi, X, samples)
    rep_.results["diagnostics"] = diag
    for k, v in diag.items():
        rep_.check(f"beta_{k}", v, "beta")
    moved = beta_transport(MetricPath(g, h, samples), psi)
    out.write_json("beta_transport.json", field_to_json(g.grid, moved.values))


def cmd_edm_residual(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"normalization": "literal", "expect_solution": False})
    if opts["normalization"] not in ("literal", "variational"):
        raise ConfigError("options.normalization must be 'literal' or 'variational'")
    g = _metric(cfg)
    params = _params(cfg)
    psis = _spinors(cfg, g)
    res = edm_residual(params, g, psis, _potential(cfg, g), normalization=opts["normalization"])
    norms = res.norms()
    rep_.results["norms"] = norms
    if opts["expect_solution"]:
        for k, v in norms.items():
            rep_.check(f"residual_{k}", v, "trivial_residual")


def cmd_lagrangian(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"expected": None})
    g = _metric(cfg)
    val = lagrangian(_params(cfg), g, _spinors(cfg, g), _potential(cfg, g))
    rep_.results["lagrangian"] = val
    if opts["expected"] is not None:
        rep_.check("lagrangian_error", abs(val - _float_option(opts, "expected")), "lagrangian")


def cmd_el_check(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"directions": 10, "seed": 0, "step": 1e-3, "scale": 0.3})
    g = _metric(cfg)
    params = _params(cfg)
    psis = _spinors(cfg, g)
    A = _potential(cfg, g)
    rng = np.random.default_rng(_int_option(opts, "seed"))
    rows = []
    for _ in range(_int_option(opts, "directions", 1)):
        d = random_direction(rng, g, psis, _float_option(opts, "scale"))
        r = el_consistency(params, g, psis, A, d, step=_float_option(opts, "step"))
        c1, c2, c4 = r.central
        ratio = (c1 - c2) / (c2 - c4) if c2 != c4 else float("nan")
        rows.append({"dL": r.dL, "pairing": r.pairing, "relative_gap": r.relative_gap, "step_ratio": ratio})
    rep_.results["directions"] = rows
    rep_.check("max_relative_gap", max(r["relative_gap"] for r in rows), "el_gap")
    rep_.check("max_step_ratio_deviation_from_4", max(abs(r["step_ratio"] - 4.0) for r in rows), "el_step_ratio")


def cmd_constraints(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"K": None, "A0": None, "A1": None, "expect_solution": False})
    g0 = _metric(cfg)
    grid = g0.grid
    n = grid.m
    if opts["K"] is None:
        K = np.zeros(grid.shape + (n, n))
    else:
        comps = opts["K"]
        ok = isinstance(comps, list) and len(comps) == n and all(isinstance(r, list) and len(r) == n for r in comps)
        if not ok:
            raise ConfigError(f"options.K must be a {n} x {n} list of expressions")
        K = np.stack([np.stack([evaluate_expression(str(c), grid.coords()) for c in row], -1) for row in comps], -2)
    forms = {}
    for name in ("A0", "A1"):
        spec = opts[name] or {"kind": "zero"}
        forms[name] = build_one_form(validate_one_form_spec(spec, n + 1, f"options.{name}"), grid, n + 1)
    rep = build_rep(n, 1)
    tw = _twist(cfg)
    psis = [slice_spinor_values(s, grid, rep.N, tw) for s in cfg.spinors]
    try:
        Z = InitialData(g0, K, psis, forms["A0"], forms["A1"], tw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = constraint_residual(Z, _params(cfg))
    norms = res.norms()
    rep_.results["norms"] = norms
    if opts["expect_solution"]:
        for k, v in norms.items():
            rep_.check(f"constraint_{k}", v, "trivial_residual")


def cmd_wave_gauge(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"target_metric": None})
    g = _metric(cfg)
    h = g if opts["target_metric"] is None else _metric(cfg, opts["target_metric"])
    Q = wave_gauge_residual(h, g)
    rep_.results["max_abs"] = float(np.max(np.abs(Q)))
    rep_.results["reference_is_metric"] = opts["target_metric"] is None
    if opts["target_metric"] is None:
        rep_.check("wave_gauge_identity", rep_.results["max_abs"], "wave_gauge_identity")
    out.write_json("wave_gauge.json", field_to_json(g.grid, Q))


def cmd_symbol(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"target_metric": None, "omega": None, "point": None})
    g = _metric(cfg)
    h = g if opts["target_metric"] is None else _metric(cfg, opts["target_metric"])
    omega = opts["omega"]
    if omega is None:
        omega = [1.0] + [0.0] * (g.grid.m - 1)
    if not isinstance(omega, list) or len(omega) != g.grid.m:
        raise ConfigError(f"options.omega must list {g.grid.m} numbers")
    template = SpinorField.zeros(g.grid, rep_for(g), _twist(cfg))
    r = symbol_report(g, h, template, omega, opts["point"], form_tol=rep_.tol["symbol_form"])
    rep_.results.update(
        {
            "omega": list(r.omega),
            "point": list(r.point),
            "dirac_symbol_residual": r.dirac_symbol_residual,
            "clifford_square_residual": r.clifford_square_residual,
            "pullback_square_scalar": r.pullback_square_scalar,
            "pullback_square_nonscalar": r.pullback_square_nonscalar,
            "candidates": r.candidates,
            "candidate_gaps": r.candidate_gaps,
            "matches": list(r.matches),
        }
    )
    rep_.check("dirac_symbol_residual", r.dirac_symbol_residual, "symbol_dirac")
    rep_.check("best_quadratic_form_gap", min(r.candidate_gaps.values()), "symbol_form")


def cmd_evolve(cfg: RunConfig, rep_: Report, out: Outputs) -> None:
    opts = _options(cfg, {"steps": 512, "cfl": 0.5, "stride": 64})
    if cfg.dimension != 1 or cfg.signature != (1, 1) or not cfg.options.get("spacetime", False):
        raise ConfigError("evolve needs a circle grid, signature [1, 1] and options.spacetime = true")
    n = cfg.grid[0]
    spec = cfg.metric
    static = spec["kind"] != "conformal" or "t" not in expression_variables(spec["u"], ("x1", "t"))
    grid = TorusGrid((n,))

    def background(t, x):
        return metric_values(spec, grid, (1, 1), coords=[x], extra={"t": np.full_like(x, t)})

    A = cfg.potential
    potential = None
    if A["kind"] != "zero":

        def potential(t, x):
            if A["kind"] == "expression":
                return np.stack([evaluate_expression(c, [x], {"t": np.full_like(x, t)}) for c in A["components"]], -1)
            return build_one_form(A, grid, 2)

    lam = cfg.params["lambda"][0] if cfg.params["lambda"] else 0.0
    q = cfg.params["q"][0] if cfg.params["q"] else 0.0
    try:
        ecfg = EvolutionConfig(
            n=n,
            steps=_int_option(opts, "steps"),
            cfl=_float_option(opts, "cfl"),
            twist=cfg.twist[0],
            lam=lam,
            stride=_int_option(opts, "stride", 1),
            background=background,
            static=static,
            potential=potential,
            charge=q,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rep = ecfg.rep
    tw = ecfg.spin_twist
    if not cfg.spinors:
        raise ConfigError("evolve needs an initial spinor")
    psi0 = slice_spinor_values(cfg.spinors[0], grid, rep.N, tw)
    result = evolve_dirac(ecfg, psi0)
    rep_.results.update(
        {
            "dt": ecfg.dt,
            "steps": ecfg.steps,
            "final_time": float(result.step_times[-1]),
            "charge_initial": float(result.charge[0]),
            "charge_final": float(result.charge[-1]),
            "charge_drift": result.diagnostics["charge_drift"],
        }
    )
    if lam == 0.0:
        rep_.check("charge_drift", result.diagnostics["charge_drift"], "charge_drift")
    s0 = cfg.spinors[0]
    if spec["kind"] == "flat" and s0["kind"] == "plane-wave" and (q == 0.0 or potential is None):
        v = complex_vector(s0["amplitude"])
        err = max(float(np.max(np.abs(state - plane_wave_solution(ecfg, s0["momentum"][0], v, t)))) for t, state in zip(result.times, result.states))
        rep_.results["plane_wave_error"] = err
        rep_.check("plane_wave_error", err, "evolution_error")
    out.write_csv(
        "evolution.csv",
        ["t", "charge", "max_norm"],
        ([float(t), float(c), float(m)] for t, c, m in zip(result.step_times, result.charge, result.max_norm)),
    )
    out.write_json("final_state.json", field_to_json(grid, result.states[-1], time=float(result.times[-1])))


HANDLERS = {
    "clifford-check": cmd_clifford_check,
    "dirac-spectrum": cmd_dirac_spectrum,
    "dirac-apply": cmd_dirac_apply,
    "dirac-pullback": cmd_dirac_pullback,
    "beta-transport": cmd_beta_transport,
    "edm-residual": cmd_edm_residual,
    "lagrangian": cmd_lagrangian,
    "el-check": cmd_el_check,
    "constraints": cmd_constraints,
    "wave-gauge": cmd_wave_gauge,
    "symbol": cmd_symbol,
    "evolve": cmd_evolve,
}


def run(command: str, cfg: RunConfig, out: str | None = None, profile: str = "default") -> tuple[int, dict]:
    """Execute ``command`` and return ``(exit status, report)``."""
    if command not in HANDLERS:
        return 4, {}
    report = Report(command, cfg, profile)
    outputs = Outputs(out, report)
    HANDLERS[command](cfg, report, outputs)
    if outputs.dir is not None:
        report.files.append("report.json")
        (outputs.dir / "report.json").write_text(dumps(report.to_dict()))
    body = report.to_dict()
    return (0 if report.passed else 1), body


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinlab", description="Spin geometry checks and Dirac operators on tori.", usage=USAGE[len("usage: ") :])
    p.add_argument("command", help="one of: " + ", ".join(COMMANDS))
    p.add_argument("config", nargs="?", default=None, help="JSON config file (default: stdin)")
    p.add_argument("--out", default=None, help="directory for bulk fields, CSV series and report.json")
    p.add_argument("--tolerance-profile", choices=sorted(PROFILES), default="default")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command not in HANDLERS:
        print(f"spinlab: unknown command {args.command!r}", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return 4
    try:
        cfg = load_config(args.config)
        status, body = run(args.command, cfg, args.out, args.tolerance_profile)
    except ConfigError as exc:
        print(f"spinlab: configuration error: {exc}", file=sys.stderr)
        return 2
    except (SpinlabError, np.linalg.LinAlgError, FloatingPointError, ValueError, ArithmeticError) as exc:
        print(f"spinlab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    sys.stdout.write(dumps(body))
    return status


if __name__ == "__main__":
    sys.exit(main())
