"""Scenario configs, the built-in catalog and the end-to-end pipeline.

A scenario is a JSON document naming a base system ``phi``, a candidate
commuting system ``psi`` and the tolerances, horizons, sample counts and
seed of the run.  :func:`run_scenario` calibrates ``phi``, audits its
cross-sections, probes separation, recovers the reparameterization of
``psi`` and checks it; every audit compares a residual with a tolerance.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import action as act
from . import centralizer as cz
from .constants import calibrate, probe_separation
from .engine import DisjointUnion, System, build_system
from .errors import FlowcentError, NoMatchError, SchemaError
from .section import CONTRACTION, RATE_SLACK, audit_chart, build_chart_batch

EXIT_OK, EXIT_AUDIT, EXIT_SCHEMA, EXIT_PIPELINE = 0, 2, 3, 4

DEFAULT_TOLERANCES = {
    "contraction_rate": CONTRACTION + RATE_SLACK,
    "level_residual": 1e-9,
    "commutation": 1e-9,
    "cocycle": 1e-6,
    "A_error": 1e-6,
    "invariance": 1e-6,
    "quasitrivial": 1e-7,
    "separated_fraction": 0.99,
    "basis_check": 1e-6,
}

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 1}
_system = {"type": "object", "required": ["kind"], "properties": {"kind": {"type": "string"}}}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["name", "phi", "tolerances", "horizons", "samples", "seed"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "phi": _system,
        "psi": _system,
        "tolerances": {"type": "object", "additionalProperties": _pos},
        "horizons": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"separation": _pos, "quasitrivial": _pos},
        },
        "samples": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _count for k in (
                "points", "section_centers", "section_points", "separation_pairs",
                "cocycle", "charts", "cocycle_charts")},
        },
        "seed": {"type": "integer"},
        "expected": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "A": {"oneOf": [_number, {"type": "array", "items": _number},
                                {"type": "array", "items": {"type": "array", "items": _number}}]},
                "separating": {"type": "boolean"},
                "commuting": {"type": "boolean"},
            },
        },
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["scenario", "constants", "separation", "centralizer", "audits", "status", "wall_time"],
    "properties": {
        "scenario": {"type": "string"},
        "constants": {"type": ["object", "null"]},
        "separation": {"type": ["object", "null"]},
        "centralizer": {"type": ["object", "null"]},
        "audits": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "value", "bound", "comparison", "passed"],
                "properties": {"passed": {"type": "boolean"}},
            },
        },
        "status": {"enum": ["pass", "audit_failure", "pipeline_error"]},
        "wall_time": {"type": ["number", "null"]},
    },
}


# ---------------------------------------------------------------------------
# Catalog

_CAT = {"kind": "suspension_flow", "matrix": [[2, 1], [1, 1]], "roof": 1.0}
_T3 = {"kind": "torus_translation_action", "directions": [[1, 0], [0, math.sqrt(2) - 1], [0, 1]]}
_FLOW_SAMPLES = {"points": 200, "section_centers": 4, "section_points": 256,
                 "separation_pairs": 200, "cocycle": 500}
_ACTION_SAMPLES = {"points": 100, "charts": 100, "cocycle_charts": 20}
_HORIZONS = {"separation": 30.0, "quasitrivial": 20.0}


def _flow(name, desc, phi, psi, expected):
    return {"name": name, "description": desc, "phi": phi, "psi": psi, "tolerances": {},
            "horizons": dict(_HORIZONS), "samples": dict(_FLOW_SAMPLES), "seed": 0,
            "expected": expected}


def _action(name, desc, psi, expected):
    return {"name": name, "description": desc, "phi": _T3, "psi": psi, "tolerances": {},
            "horizons": {"quasitrivial": 20.0}, "samples": dict(_ACTION_SAMPLES), "seed": 0,
            "expected": expected}


BUILTINS = {c["name"]: c for c in [
    _flow("cat-suspension-self", "suspension of the cat map, psi = phi, A = 1",
          _CAT, {"kind": "reparameterized", "speed": 1.0}, {"A": 1.0, "separating": True}),
    _flow("cat-suspension-c2", "suspension of the cat map, psi_t = phi_2t, A = 2",
          _CAT, {"kind": "reparameterized", "speed": 2.0}, {"A": 2.0, "separating": True}),
    _flow("cat-suspension-c1.37", "suspension of the cat map, psi_t = phi_1.37t, A = 1.37",
          _CAT, {"kind": "reparameterized", "speed": 1.37}, {"A": 1.37, "separating": True}),
    _flow("two-component-piecewise", "two cat suspensions, speeds 1 and 3 by component",
          {"kind": "disjoint_union", "components": [_CAT, _CAT]},
          {"kind": "reparameterized", "speed": [1.0, 3.0]}, {"A": [1.0, 3.0], "separating": True}),
    _flow("torus-translation-negative", "irrational translation flow on T2, isometric control",
          {"kind": "torus_translation_flow", "direction": [1.0, math.sqrt(2) - 1]},
          {"kind": "reparameterized", "speed": 0.5}, {"A": 0.5, "separating": False}),
    _action("action-T3-B", "translation R2 action on T3, Psi_u = Phi_Bu with B = [[2,0],[1,1]]",
            {"kind": "linear_reparam_action", "B": [[2, 0], [1, 1]]}, {"A": [[2, 0], [1, 1]]}),
    _action("action-identity", "translation R2 action on T3, Psi = Phi, A = I",
            {"kind": "linear_reparam_action", "B": [[1, 0], [0, 1]]}, {"A": [[1, 0], [0, 1]]}),
    _flow("broken-commuting-control", "leaf shear of the cat suspension; does not commute",
          _CAT, {"kind": "leaf_shear", "rate": 1.0}, {"separating": True, "commuting": False}),
]}


def list_scenarios() -> list:
    """``(name, description)`` for every built-in scenario."""
    return [(n, c["description"]) for n, c in BUILTINS.items()]


def builtin(name: str) -> dict:
    if name not in BUILTINS:
        raise SchemaError(f"unknown built-in scenario {name!r}; see 'list'")
    return copy.deepcopy(BUILTINS[name])


# ---------------------------------------------------------------------------
# Config handling


def validate_config(config: dict) -> dict:
    """Validate against :data:`CONFIG_SCHEMA` and build both systems once."""
    errs = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(config),
                  key=lambda e: list(e.absolute_path))
    if errs:
        lines = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errs]
        raise SchemaError("invalid scenario config:\n  " + "\n  ".join(lines))
    try:
        phi = build_system(config["phi"])
        if "psi" in config:
            build_system(config["psi"], base=phi)
    except (FlowcentError, KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"invalid system description: {e}") from e
    return config


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        config = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    return validate_config(config)


# ---------------------------------------------------------------------------
# Reports


@dataclass
class RunReport:
    scenario: str
    constants: dict | None = None
    separation: dict | None = None
    centralizer: dict | None = None
    sections: dict | None = None
    audits: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    error: dict | None = None
    wall_time: float | None = None
    points: list = field(default_factory=list, repr=False)

    def audit(self, name: str, value: float, bound: float, comparison: str) -> bool:
        ops = {"<=": value <= bound, "<": value < bound, ">=": value >= bound, ">": value > bound}
        passed = bool(ops[comparison]) and not math.isnan(value)
        self.audits.append({"name": name, "value": float(value), "bound": float(bound),
                            "comparison": comparison, "passed": passed})
        return passed

    def fail(self, name: str, message: str, value: float = float("nan")):
        self.audits.append({"name": name, "value": float(value), "bound": None, "comparison": "error",
                            "passed": False, "message": message})

    @property
    def status(self) -> str:
        if self.error is not None:
            return "pipeline_error"
        return "pass" if all(a["passed"] for a in self.audits) else "audit_failure"

    @property
    def exit_code(self) -> int:
        return {"pass": EXIT_OK, "audit_failure": EXIT_AUDIT, "pipeline_error": EXIT_PIPELINE}[self.status]

    def to_dict(self, normalize: bool = False) -> dict:
        d = {"scenario": self.scenario, "status": self.status, "constants": self.constants,
             "sections": self.sections, "separation": self.separation,
             "centralizer": self.centralizer, "audits": self.audits, "notes": self.notes,
             "error": self.error, "wall_time": None if normalize else self.wall_time}
        return d


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    return s if any(c in s for c in ".e") else s + ".0"


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent, _level + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(obj)


def write_report(report: RunReport, out_dir, normalize: bool = False) -> Path:
    """Write ``report.json`` and ``points.csv`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(report.to_dict(normalize)) + "\n")
    if report.points:
        with open(out / "points.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(report.points[0].keys()))
            for row in report.points:
                w.writerow([_fmt_float(v) if isinstance(v, float) else v for v in row.values()])
    return out


# ---------------------------------------------------------------------------
# Pipeline


class _Stage:
    def __init__(self, report: RunReport):
        self.report, self.name = report, None

    def __call__(self, name):
        self.name = name
        return self


def _expected_A_flow(expected, phi: System, X):
    if isinstance(expected, list):
        if not isinstance(phi.space, DisjointUnion):
            raise SchemaError("per-component A needs a disjoint union")
        return np.asarray(expected, dtype=float)[X[:, 0].astype(int)]
    return np.full(len(X), float(expected))


def _run_flow(cfg, phi, psi, report, stage, tol):
    seed, samples, horizons = cfg["seed"], cfg["samples"], cfg["horizons"]
    expected = cfg.get("expected", {})

    stage("calibrate")
    c = calibrate(phi, seed=seed)
    report.constants = c.to_dict()

    stage("sections")
    centers = phi.sample(samples.get("section_centers", 4), seed + 101)
    stats = [audit_chart(build_chart_batch(phi, x, c), samples.get("section_points", 256), seed + i)
             for i, x in enumerate(centers)]
    max_rate = max(s["max_rate"] for s in stats)
    g_min = min(s["g_min"] for s in stats)
    level = max(s["level_residual_max"] for s in stats)
    report.sections = {"centers": len(stats), "solves": sum(s["solves"] for s in stats),
                       "rates_recorded": int(sum(len(s["rates"]) for s in stats)),
                       "max_rate": max_rate, "g_min": g_min, "level_residual_max": level,
                       "iterations_max": max(s["iterations_max"] for s in stats)}
    report.audit("contraction_rate", max_rate, tol["contraction_rate"], "<=")
    report.audit("g_slope", g_min, c.eta / 2, ">")
    report.audit("level_residual", level, tol["level_residual"], "<=")

    stage("separation")
    sep = probe_separation(phi, c.delta, horizons.get("separation", 30.0),
                           samples.get("separation_pairs", 200), seed, constants=c)
    report.separation = sep.to_dict()
    report.separation["counterexamples"] = report.separation["counterexamples"][:5]
    certified = sep.separated_fraction >= tol["separated_fraction"]
    report.separation["separating_certified"] = certified
    if expected.get("separating", True):
        report.audit("separated_fraction", sep.separated_fraction, tol["separated_fraction"], ">=")
    else:
        report.audit("separation_negative_control", sep.separated_fraction, 0.0, "<=")
    if not certified:
        report.notes.append("separating hypothesis not certified")

    if psi is None:
        return
    stage("commutation")
    comm = cz.check_commutation(phi, psi, seed=seed)
    report.centralizer = {"commutation_residual": comm, "delta": c.delta}
    report.audit("commutation", comm, tol["commutation"], "<=")

    stage("recovery")
    X = phi.sample(samples.get("points", 200), seed + 7)
    try:
        res = cz.verify_cocycle(phi, psi, c, samples.get("cocycle", 500), seed)
        field_ = cz.recover_A_flow(phi, psi, c, X, seed=seed)
    except NoMatchError as e:
        report.fail("recovery", f"no local orbit match: {e}", e.residual)
        report.notes.append("recovery failed: psi is not a reparameterization of phi")
        return
    for k, v in res._asdict().items():
        report.audit(f"cocycle_{k.split('_')[0]}", v, tol["cocycle"], "<=")
    report.audit("A_invariance", field_.invariance_residual_max, tol["invariance"], "<=")

    stage("verification")
    H = horizons.get("quasitrivial", 20.0)
    field_.quasitrivial_residual_max = cz.verify_quasitrivial(phi, psi, field_, H)
    report.audit("quasitrivial", field_.quasitrivial_residual_max, tol["quasitrivial"], "<=")
    A = field_.values()
    if "A" in expected:
        err = float(np.max(np.abs(A - _expected_A_flow(expected["A"], phi, X))))
        report.audit("A_error", err, tol["A_error"], "<=")
    ts = np.linspace(-H, H, 41)
    per_point = np.max([phi.dist(psi.flow(t, X), phi.flow(A * t, X)) for t in ts], axis=0)
    report.centralizer.update({
        "a": field_.a, "A_min": float(A.min()), "A_max": float(A.max()),
        "invariance_residual_max": field_.invariance_residual_max,
        "quasitrivial_residual_max": field_.quasitrivial_residual_max,
        "A_lipschitz_sampled": cz.sampled_lipschitz(phi, field_),
        "samples": len(A),
    })
    for x, v, r in zip(X, A, per_point):
        report.points.append({**{f"x{i}": float(xi) for i, xi in enumerate(x)}, "A": float(v),
                              "residual": float(r)})


def _run_action(cfg, phi, psi, report, stage, tol):
    seed, samples = cfg["seed"], cfg["samples"]
    expected = cfg.get("expected", {})
    stage("calibrate")
    eps0 = act.estimate_epsilon0_action(phi, seed=seed)
    report.constants = {"epsilon0": eps0, "mu": act.MU_FRACTION * eps0}
    report.separation = None
    report.notes.append("separation is not exercised for translation actions of rank >= 2")

    stage("flowbox")
    X = phi.sample(samples.get("charts", 100), seed + 7)
    charts = [act.build_flowbox(phi, phi.point(x), seed=seed) for x in X]
    bounds = [act.flowbox_bounds(ch, 16, seed) for ch in charts]
    report.constants.update({"r0_min": min(ch.r0 for ch in charts),
                             "delta_min": min(ch.delta for ch in charts)})
    m_min, n_max = min(b[0] for b in bounds), max(b[1] for b in bounds)
    report.sections = {"charts": len(charts), "m_min": m_min, "norm_max": n_max}
    report.audit("flowbox_m_min", m_min, act.M_LOWER, ">=")
    report.audit("flowbox_norm_max", n_max, act.NORM_UPPER, "<=")
    if psi is None:
        return

    stage("commutation")
    rng = np.random.default_rng(seed)
    U, W = rng.uniform(-5, 5, (2, len(X), phi.rank))
    comm = float(np.max(phi.dist(psi.act(U, phi.act(W, X)), phi.act(W, psi.act(U, X)))))
    report.centralizer = {"commutation_residual": comm}
    report.audit("commutation", comm, tol["commutation"], "<=")

    stage("recovery")
    try:
        res = act.verify_cocycle_action(phi, psi, charts[:samples.get("cocycle_charts", 20)], seed=seed)
        mf = act.recover_A_action(phi, psi, charts, cfg["horizons"].get("quasitrivial", 20.0), seed=seed)
    except NoMatchError as e:
        report.fail("recovery", f"off-orbit: {e}", e.residual)
        return
    for k, v in res.items():
        report.audit(f"cocycle_{k.split('_')[0]}", v, tol["cocycle"], "<=")
    report.audit("A_invariance", mf.invariance_residual_max, tol["invariance"], "<=")
    report.audit("quasitrivial", mf.quasitrivial_residual_max, tol["quasitrivial"], "<=")
    report.audit("basis_check", mf.basis_check_residual_max, tol["basis_check"], "<=")
    As = np.array([A for _, A in mf.samples])
    if "A" in expected:
        report.audit("A_error", float(np.max(np.abs(As - np.asarray(expected["A"], float)))),
                     tol["A_error"], "<=")
    report.centralizer.update({
        "a": mf.a, "A_mean": As.mean(axis=0).tolist(),
        "invariance_residual_max": mf.invariance_residual_max,
        "quasitrivial_residual_max": mf.quasitrivial_residual_max,
        "basis_check_residual_max": mf.basis_check_residual_max, "samples": len(As),
    })
    for x, A in zip(X, As):
        row = {f"x{i}": float(xi) for i, xi in enumerate(x)}
        row.update({f"A{i + 1}{j + 1}": float(A[i, j]) for i in range(A.shape[0]) for j in range(A.shape[1])})
        report.points.append(row)


def run_scenario(config: dict) -> RunReport:
    """Run the whole pipeline; audit failures and pipeline errors end up in the report."""
    cfg = validate_config(config)
    report = RunReport(scenario=cfg["name"])
    tol = {**DEFAULT_TOLERANCES, **cfg["tolerances"]}
    stage = _Stage(report)
    t0 = time.perf_counter()
    try:
        stage("build")
        phi = build_system(cfg["phi"])
        psi = build_system(cfg["psi"], base=phi) if "psi" in cfg else None
        runner = _run_action if phi.rank > 1 else _run_flow
        runner(cfg, phi, psi, report, stage, tol)
    except Exception as e:  # carried into the report with the failing stage
        report.error = {"stage": stage.name, "type": type(e).__name__, "message": str(e)}
    report.wall_time = time.perf_counter() - t0
    return report
