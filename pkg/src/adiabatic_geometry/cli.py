"""Command line front end: declarative YAML experiment specs in, CSV tables and a JSON manifest out.

    adiabatic-geometry validate --spec grid.yaml
    adiabatic-geometry run --spec grid.yaml --out results/
    adiabatic-geometry list-models

Exit codes: 0 success, 2 invalid spec or failed precondition, 3 numerical
failure, 4 I/O failure. The default output root comes from
``ADIABATIC_GEOMETRY_OUT`` (falling back to ``./results``).
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import itertools
import json
import math
import os
import sys
import tempfile
import time
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import analysis, dynamics, geometry, models
from .errors import DegeneracyError, DomainError, GaugeError, InertiaError, ValidationError

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
OUT_ENV = "ADIABATIC_GEOMETRY_OUT"

NUMERIC_FAILURES = (DegeneracyError, GaugeError, InertiaError, DomainError, ArithmeticError,
                    np.linalg.LinAlgError)

# ----------------------------------------------------------------- schema

_num = {"type": "number"}
_int = {"type": "integer"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}
_axis = {
    "type": "object",
    "additionalProperties": False,
    "required": ["start", "stop", "num"],
    "properties": {"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 1},
                   "log": {"type": "boolean"}},
}


def _obj(required, **props):
    return {"type": "object", "additionalProperties": False, "required": list(required), "properties": props}


MODEL_SCHEMAS = {
    "spin-planar": _obj(["spin", "gB", "kappa"], spin={"type": "number", "exclusiveMinimum": 0},
                        gB=_num, kappa=_num),
    "spin-sphere": _obj(["spin", "gB"], spin={"type": "number", "exclusiveMinimum": 0}, gB=_num),
    "spin-affine": _obj(["spin", "offset", "matrix"], spin={"type": "number", "exclusiveMinimum": 0},
                        offset=_vec, matrix=_mat),
    "two-level": _obj(["offset", "matrix"], offset=_vec, matrix=_mat),
    "moving-well": _obj(["profile"], profile={"enum": ["harmonic", "gaussian"]}, omega=_num, depth=_num,
                        width=_num, mass=_num, n_points={"type": "integer", "minimum": 3}, spacing=_num,
                        stencil_order={"enum": [2, 4, 6]}),
    "cranked-oscillator": _obj(["omega_x", "omega_z"], omega_x=_num, omega_z=_num, mass=_num,
                               n_basis={"type": "integer", "minimum": 2}),
    "random-family": _obj(["dim", "n_params"], dim={"type": "integer", "minimum": 2},
                          n_params={"type": "integer", "minimum": 1}),
}

TASK_SCHEMAS = {
    "geometry-grid": _obj(["axes"], level=_int, axes={"type": "array", "items": _axis, "minItems": 1},
                          primitive=_num),
    "velocity-sweep": _obj(["speeds"], level=_int, start=_vec, direction=_vec,
                           speeds={"type": "array", "items": _num, "minItems": 1}, n_periods=_num,
                           transient_fraction=_num),
    "leakage-scan": _obj(["rates"], level=_int, center=_vec, direction=_vec,
                         rates={"type": "array", "items": _num, "minItems": 1}, half_span=_num),
    "trajectory": _obj(["x0", "p0", "duration"], mode={"enum": ["effective", "coupled"]}, level=_int,
                       x0=_vec, p0=_vec, duration=_num, primitive=_num,
                       axes={"type": "array", "items": _axis, "minItems": 1}),
    "crossing-scan": _obj(["radii"], level=_int, center=_vec, direction=_vec, radii=_axis, primitive=_num),
    "trk": _obj([], level=_int, point=_vec, refinements={"type": "integer", "minimum": 0}),
    "inglis": _obj(["n_occupied"], point=_vec,
                   n_occupied={"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}),
    "order-audit": _obj(["speeds", "periods"], level=_int, center=_vec, primitive=_num,
                        speeds={"type": "array", "items": _num, "minItems": 1},
                        periods={"type": "array", "items": _num, "minItems": 1},
                        plane={"type": "array", "items": _int, "minItems": 2, "maxItems": 2},
                        n_quad={"type": "integer", "minimum": 8}),
}


def _tagged(kinds: dict) -> dict:
    branches = [
        {"if": {"properties": {"kind": {"const": k}}},
         "then": _obj(["kind", "params"], kind={"const": k}, params=sch)}
        for k, sch in kinds.items()
    ]
    return {"type": "object", "required": ["kind"], "properties": {"kind": {"enum": sorted(kinds)}},
            "allOf": branches}


SPEC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "task"],
    "properties": {
        "name": {"type": "string"},
        "model": _tagged(MODEL_SCHEMAS),
        "task": _tagged(TASK_SCHEMAS),
        "numeric": _obj([], hbar={"type": "number", "exclusiveMinimum": 0}, gap_rtol=_num,
                        dt={"type": ["number", "null"]}, dt_factor=_num, tolerance=_num,
                        seed={"type": "integer", "minimum": 0}, threads={"type": ["integer", "null"]},
                        rtol=_num, atol=_num),
        "output": _obj([], dir={"type": "string"}, prefix={"type": "string"},
                       format={"enum": ["csv"]}, stride={"type": "integer", "minimum": 1}),
    },
}

NUMERIC_DEFAULTS = {"hbar": 1.0, "gap_rtol": 1e-8, "dt": None, "dt_factor": dynamics.DEFAULT_DT_FACTOR,
                    "tolerance": 0.01, "seed": 0, "threads": None, "rtol": 1e-11, "atol": 1e-13}
OUTPUT_DEFAULTS = {"prefix": "result", "format": "csv", "stride": 10}
MODEL_DEFAULTS = {
    "moving-well": {"omega": 1.0, "depth": 5.0, "width": 1.0, "mass": 1.0, "n_points": 481, "spacing": 0.05,
                    "stencil_order": 2},
    "cranked-oscillator": {"mass": 1.0, "n_basis": 12},
}
TASK_DEFAULTS = {
    "geometry-grid": {"level": 0, "primitive": 1.0},
    "velocity-sweep": {"level": 0, "start": None, "direction": None, "n_periods": 100.0,
                       "transient_fraction": 0.2},
    "leakage-scan": {"level": 0, "center": None, "direction": None, "half_span": 20.0},
    "trajectory": {"mode": "effective", "level": 0, "primitive": 1.0, "axes": None},
    "crossing-scan": {"level": 0, "center": None, "direction": None, "primitive": 1.0},
    "trk": {"level": 0, "point": None, "refinements": 0},
    "inglis": {"point": None},
    "order-audit": {"level": 0, "center": None, "primitive": 1.0, "plane": [0, 1], "n_quad": 128},
}


class SpecError(Exception):
    """Schema or precondition failure (exit 2)."""


def load_spec(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read spec {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecError(f"spec is not valid YAML: {exc}") from exc
    return doc if doc is not None else {}


def _schema_messages(doc) -> list[str]:
    validator = jsonschema.Draft202012Validator(SPEC_SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        msg = err.message
        if list(err.absolute_path)[-1:] == ["kind"] and "is not one of" in msg:
            block = err.absolute_path[0]
            kinds = MODEL_SCHEMAS if block == "model" else TASK_SCHEMAS
            msg = f"unknown {block} kind {err.instance!r}; supported: {', '.join(sorted(kinds))}"
        out.append(f"{where}: {msg}")
    return out


def resolve(doc: dict, threads: int | None = None, seed: int | None = None, out: str | None = None) -> dict:
    """Validate ``doc`` and return a copy with every default filled in."""
    msgs = _schema_messages(doc)
    if msgs:
        raise SpecError("schema validation failed:\n  " + "\n  ".join(msgs))
    spec = copy.deepcopy(doc)
    spec.setdefault("name", spec.get("output", {}).get("prefix", "experiment"))
    spec["numeric"] = {**NUMERIC_DEFAULTS, **spec.get("numeric", {})}
    spec["output"] = {**OUTPUT_DEFAULTS, **spec.get("output", {})}
    mk, tk = spec["model"]["kind"], spec["task"]["kind"]
    spec["model"]["params"] = {**MODEL_DEFAULTS.get(mk, {}), **spec["model"]["params"]}
    spec["task"]["params"] = {**TASK_DEFAULTS[tk], **spec["task"]["params"]}
    num = spec["numeric"]
    if threads is not None:
        num["threads"] = threads
    if num["threads"] is None:
        num["threads"] = os.cpu_count() or 1
    if seed is not None:
        num["seed"] = seed
    if out is not None:
        spec["output"]["dir"] = out
    spec["output"].setdefault("dir", os.environ.get(OUT_ENV, "results"))
    return spec


def build_model(spec: dict) -> models.FastModel:
    kind = spec["model"]["kind"]
    p = spec["model"]["params"]
    hbar = spec["numeric"]["hbar"]
    try:
        if kind == "spin-planar":
            return models.planar_rotation_spin(p["spin"], p["gB"], p["kappa"], hbar=hbar)
        if kind == "spin-sphere":
            return models.sphere_spin(p["spin"], p["gB"], hbar=hbar)
        if kind == "spin-affine":
            return models.affine_spin(p["spin"], p["offset"], p["matrix"], hbar=hbar)
        if kind == "two-level":
            return models.affine_two_level(p["offset"], p["matrix"], hbar=hbar)
        if kind == "moving-well":
            prof = (models.harmonic_well(p["omega"], p["mass"]) if p["profile"] == "harmonic"
                    else models.gaussian_well(p["depth"], p["width"]))
            return models.MovingWellModel(prof, p["mass"], p["n_points"], p["spacing"], p["stencil_order"], hbar)
        if kind == "cranked-oscillator":
            return models.cranked_oscillator_model(p["omega_x"], p["omega_z"], p["mass"], p["n_basis"], hbar=hbar)
        return models.random_matrix_family(p["dim"], p["n_params"], spec["numeric"]["seed"], hbar=hbar)
    except (ValidationError, ValueError) as exc:
        raise SpecError(f"model block rejected: {exc}") from exc


def _axis_values(ax: dict) -> np.ndarray:
    if ax.get("log"):
        if ax["start"] <= 0 or ax["stop"] <= 0:
            raise SpecError("log-spaced axis needs positive start and stop")
        return np.geomspace(ax["start"], ax["stop"], ax["num"])
    return np.linspace(ax["start"], ax["stop"], ax["num"])


def _origin(model, value):
    return np.zeros(model.n_params) if value is None else np.asarray(value, dtype=float)


def _unit(model, value):
    d = np.zeros(model.n_params)
    if value is None:
        d[0] = 1.0
    else:
        d = np.asarray(value, dtype=float)
    if d.size != model.n_params or not np.linalg.norm(d) > 0:
        raise SpecError(f"direction must be a nonzero {model.n_params}-vector")
    return d / np.linalg.norm(d)


def preconditions(spec: dict, model: models.FastModel) -> list[str]:
    """Physics checks that need no heavy computation. Returns human-readable notes; raises SpecError."""
    t = spec["task"]["params"]
    kind = spec["task"]["kind"]
    num = spec["numeric"]
    notes = []
    for key in ("start", "center", "point", "x0"):
        if t.get(key) is not None and len(t[key]) != model.n_params:
            raise SpecError(f"task.{key} must have {model.n_params} entries")
    level = t.get("level", 0)
    if not 0 <= level < model.dim:
        raise SpecError(f"task.level {level} out of range for dimension {model.dim}")
    if num["dt"] is not None and kind in ("velocity-sweep", "leakage-scan", "trajectory"):
        x = _origin(model, t.get("start", t.get("center", t.get("x0"))))
        width = dynamics.spectral_range(model, x) * num["dt"] / model.hbar
        if width >= dynamics.DT_RULE:
            raise SpecError(
                f"precondition 'dt rule' failed: dt * spectral range / hbar = {width:.3g} at {x.tolist()} "
                f"(must be < {dynamics.DT_RULE})"
            )
        notes.append(f"dt rule satisfied at sample point ({width:.3g} < {dynamics.DT_RULE})")
    if kind == "velocity-sweep":
        sp = t["speeds"]
        if any(a < b for a, b in zip(sp, sp[1:])):
            raise SpecError("task.speeds must be sorted in descending order")
    if kind in ("trk",) and not isinstance(model, models.MovingWellModel):
        raise SpecError("trk task needs a moving-well model")
    if kind == "inglis" and not isinstance(model, models.CrankedOscillatorModel):
        raise SpecError("inglis task needs a cranked-oscillator model")
    if kind == "order-audit" and model.n_params < 2:
        raise SpecError("order-audit needs at least two slow coordinates")
    if kind == "trajectory" and t["mode"] == "effective" and t["axes"] is None:
        raise SpecError("effective trajectory needs task.axes for the field grid")
    return notes


# -------------------------------------------------------------- tasks


def _pairs(d: int, strict: bool):
    return [(i, j) for i in range(d) for j in range(i + (1 if strict else 0), d)]


def task_geometry_grid(model, spec):
    t = spec["task"]["params"]
    axes = [_axis_values(a) for a in t["axes"]]
    if len(axes) != model.n_params:
        raise SpecError(f"geometry-grid needs {model.n_params} axes")
    pts = [np.array(p) for p in itertools.product(*axes)]
    res = geometry.geometry_grid(model, pts, t["level"], t["primitive"], workers=spec["numeric"]["threads"],
                                 gap_rtol=spec["numeric"]["gap_rtol"])
    d = model.n_params
    names = model.param_names
    sym, anti = _pairs(d, False), _pairs(d, True)
    header = ([f"X_{n}" for n in names] + ["E_n"] + [f"A_{n}" for n in names]
              + [f"g_{names[i]}{names[j]}" for i, j in sym] + [f"F_{names[i]}{names[j]}" for i, j in anti]
              + [f"I_ind_{names[i]}{names[j]}" for i, j in sym] + ["Phi", "Phi_tilde"])
    rows, failures = [], []
    for rec in res:
        if not rec.ok:
            failures.append({"index": rec.index, "point": rec.point.tolist(), "error": rec.error})
            continue
        gt, ef = rec.tensors, rec.field
        rows.append(list(rec.point) + [gt.energy] + list(gt.connection)
                    + [gt.metric[i, j] for i, j in sym] + [gt.curvature[i, j] for i, j in anti]
                    + [gt.induced_inertia[i, j] for i, j in sym] + [ef.phi_primitive, ef.phi_total])
    return header, rows, {}, failures


def task_velocity_sweep(model, spec):
    t = spec["task"]["params"]
    num = spec["numeric"]
    sw = dynamics.velocity_sweep(model, _unit(model, t["direction"]), t["speeds"], t["level"],
                                 _origin(model, t["start"]), n_periods=t["n_periods"],
                                 transient_fraction=t["transient_fraction"], tol=num["tolerance"],
                                 dt=num["dt"], stride=spec["output"]["stride"], workers=num["threads"])
    rows = [[r.speed, r.delta_e, r.ratio, r.reference] for r in sw.rows]
    return ["V", "dE_avg", "ratio", "d.I_ind.d"], rows, {"converged": sw.converged}, []


def task_leakage_scan(model, spec):
    t = spec["task"]["params"]
    num = spec["numeric"]
    rows = dynamics.leakage_scan(model, t["rates"], t["level"], _origin(model, t["center"]),
                                 _unit(model, t["direction"]), t["half_span"], num["dt_factor"],
                                 stride=spec["output"]["stride"], workers=num["threads"])
    table = [[r.rate, r.leakage, r.max_leakage, int(r.censored)] for r in rows]
    live = [r for r in rows if not r.censored]
    extra = {}
    if len(live) >= 3:
        extra["log_linearity"] = analysis.log_linearity([1 / r.rate for r in live], [r.leakage for r in live])
    return ["rate", "leakage", "max_leakage", "censored"], table, extra, []


def task_trajectory(model, spec):
    t = spec["task"]["params"]
    num = spec["numeric"]
    d = model.n_params
    x0 = np.asarray(t["x0"], dtype=float)
    n_samples = max(1, int(round(t["duration"] / (num["dt"] or t["duration"] / 1000))))
    dt = t["duration"] / n_samples
    if t["mode"] == "coupled":
        psi0 = model.spectrum(x0).state(t["level"])
        rec = dynamics.coupled_reference(model, t["primitive"], x0, t["p0"], psi0, t["duration"], dt,
                                         t["level"], num["rtol"], num["atol"])
    else:
        axes = [_axis_values(a) for a in t["axes"]]
        fields = dynamics.GridFields.from_model(model, axes, t["level"], t["primitive"],
                                                workers=num["threads"])
        rec = dynamics.effective_trajectory(fields, x0, t["p0"], t["duration"], dt, rtol=num["rtol"],
                                            atol=num["atol"])
    names = model.param_names
    header = ["t"] + [f"X_{n}" for n in names] + [f"P_{n}" for n in names] + ["energy"]
    stride = spec["output"]["stride"]
    keep = list(range(0, len(rec.times), stride))
    if keep[-1] != len(rec.times) - 1:
        keep.append(len(rec.times) - 1)
    rows = [[rec.times[k], *rec.positions[k], *rec.momenta[k], rec.energy[k]] for k in keep]
    e = rec.energy
    extra = {"truncated": bool(rec.truncated), "energy_drift": float(np.ptp(e) / max(abs(e[0]), 1e-300)),
             "dim": d}
    return header, rows, extra, []


def task_crossing_scan(model, spec):
    t = spec["task"]["params"]
    c = _origin(model, t["center"])
    u = _unit(model, t["direction"])
    radii = _axis_values(t["radii"])
    rows, failures = [], []
    for r in radii:
        try:
            gt = geometry.geometric_tensors(model, c + r * u, t["level"], t["primitive"],
                                            spec["numeric"]["gap_rtol"])
        except NUMERIC_FAILURES as exc:
            failures.append({"r": float(r), "error": f"{type(exc).__name__}: {exc}"})
            continue
        rows.append([r, math.sqrt(max(np.trace(gt.metric), 0.0)), gt.scalar_potential,
                     np.linalg.norm(gt.induced_inertia, 2)])
    extra = {}
    if len(rows) >= 8 and not failures:
        arr = np.array(rows)
        for k, key in ((1, "sqrt_tr_g"), (2, "Phi"), (3, "I_ind_norm")):
            try:
                fit = analysis.fit_power_law(arr[:, 0], arr[:, k])
                extra[f"exponent_{key}"] = fit.exponent
                extra[f"stderr_{key}"] = fit.stderr
            except ValidationError as exc:
                extra[f"exponent_{key}"] = f"not fitted: {exc}"
    return ["r", "sqrt_tr_g", "Phi", "I_ind_norm"], rows, extra, failures


def task_trk(model, spec):
    t = spec["task"]["params"]
    point = _origin(model, t["point"])
    rows = []
    m = model
    for k in range(t["refinements"] + 1):
        if k:
            m = models.MovingWellModel(m.profile, m.mass, 2 * (m.dim - 1) + 1, m.spacing / 2, m.stencil_order,
                                       m.hbar)
        inertia = geometry.induced_inertia(m, point, t["level"])[0, 0]
        rows.append([m.spacing, m.dim, inertia, inertia / m.mass, analysis.trk_sum(m, t["level"], point)])
    return ["spacing", "n_points", "I_XX", "I_XX_over_m", "trk_sum"], rows, {}, []


def task_inglis(model, spec):
    t = spec["task"]["params"]
    point = _origin(model, t["point"])
    rows, failures = [], []
    for n in t["n_occupied"]:
        try:
            ing = models.inglis_inertia(model, point, n)[0, 0]
            rig = models.rigid_body_inertia(model, n, point)
        except NUMERIC_FAILURES as exc:
            failures.append({"n_occupied": n, "error": f"{type(exc).__name__}: {exc}"})
            continue
        rows.append([n, ing, rig, ing / rig])
    return ["n_occupied", "inglis", "rigid", "ratio"], rows, {}, failures


def task_order_audit(model, spec):
    t = spec["task"]["params"]
    fields = dynamics.DirectFields(model, t["level"], t["primitive"])
    c = _origin(model, t["center"])
    rows = []
    for v, p in itertools.product(t["speeds"], t["periods"]):
        a = dynamics.action_order_audit(fields, c, v, p, tuple(t["plane"]), t["n_quad"])
        rows.append([v, p, a.scalar_action, a.berry_phase, a.inertial_action])
    extra = {}
    if len(t["speeds"]) > 1 and len(t["periods"]) > 1:
        arr = np.array(rows)
        for k, key in ((2, "scalar"), (3, "berry"), (4, "inertial")):
            try:
                fit = analysis.fit_speed_period(arr[:, 0], arr[:, 1], arr[:, k])
                extra[f"{key}_exponents"] = [fit.speed_exponent, fit.period_exponent]
            except ValidationError as exc:
                extra[f"{key}_exponents"] = f"not fitted: {exc}"
    return ["V", "T", "scalar_action", "berry_phase", "inertial_action"], rows, extra, []


TASKS = {
    "geometry-grid": task_geometry_grid,
    "velocity-sweep": task_velocity_sweep,
    "leakage-scan": task_leakage_scan,
    "trajectory": task_trajectory,
    "crossing-scan": task_crossing_scan,
    "trk": task_trk,
    "inglis": task_inglis,
    "order-audit": task_order_audit,
}


# ------------------------------------------------------------ persistence


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run_spec(spec_path, out=None, threads=None, seed=None, quiet=False) -> int:
    t0 = time.perf_counter()
    raw = Path(spec_path).read_bytes()
    spec = resolve(load_spec(spec_path), threads, seed, out)
    model = build_model(spec)
    preconditions(spec, model)
    try:
        header, rows, extra, failures = TASKS[spec["task"]["kind"]](model, spec)
    except NUMERIC_FAILURES as exc:
        header, rows, extra = [], [], {}
        failures = [{"error": f"{type(exc).__name__}: {exc}"}]
    except ValidationError as exc:
        raise SpecError(str(exc)) from exc
    out_dir = Path(spec["output"]["dir"])
    prefix = spec["output"]["prefix"]
    files = {}
    if header:
        files["table"] = f"{prefix}.csv"
        atomic_write(out_dir / files["table"], csv_text(header, rows))
    if failures:
        files["failures"] = f"{prefix}.failures.json"
        atomic_write(out_dir / files["failures"], json.dumps(failures, indent=2) + "\n")
    manifest = {
        "spec_sha256": hashlib.sha256(raw).hexdigest(),
        "version": _version(),
        "wall_time_s": time.perf_counter() - t0,
        "resolved_spec": spec,
        "model": model.describe(),
        "rows": len(rows),
        "failures": len(failures),
        "summary": extra,
        "files": files,
    }
    atomic_write(out_dir / f"{prefix}.manifest.json", json.dumps(_jsonable(manifest), indent=2) + "\n")
    if not quiet:
        print(f"wrote {len(rows)} rows to {out_dir / files.get('table', '')}")
        for k, v in extra.items():
            print(f"  {k}: {v}")
    if failures:
        print(f"{len(failures)} numerical failure(s); see {out_dir / files['failures']}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def validate_spec(spec_path, threads=None, seed=None, quiet=False) -> int:
    spec = resolve(load_spec(spec_path), threads, seed)
    model = build_model(spec)
    notes = preconditions(spec, model)
    if not quiet:
        print("OK")
        for n in notes:
            print(f"  {n}")
        print(yaml.safe_dump(_jsonable(spec), sort_keys=True), end="")
    return EXIT_OK


def list_models() -> str:
    lines = []
    for kind, sch in MODEL_SCHEMAS.items():
        req = sch["required"]
        opt = [k for k in sch["properties"] if k not in req]
        lines.append(f"{kind:20s} required: {', '.join(req)}" + (f"; optional: {', '.join(opt)}" if opt else ""))
    lines.append("")
    lines.append("tasks: " + ", ".join(TASKS))
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adiabatic-geometry", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", required=True, help="YAML experiment spec")
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--quiet", action="store_true")
    run = sub.add_parser("run", parents=[common], help="run an experiment")
    run.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./results)")
    sub.add_parser("validate", parents=[common], help="check a spec without computing")
    sub.add_parser("list-models", help="list model kinds and tasks")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "list-models":
        print(list_models())
        return EXIT_OK
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise SpecError("--seed must be an unsigned 64-bit integer")
        if args.verb == "validate":
            return validate_spec(args.spec, args.threads, args.seed, args.quiet)
        return run_spec(args.spec, args.out, args.threads, args.seed, args.quiet)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
