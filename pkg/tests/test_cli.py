import csv
import json

import pytest
import yaml

from adiabatic_geometry import cli

GRID = {
    "model": {"kind": "spin-sphere", "params": {"spin": 0.5, "gB": 1.0}},
    "task": {"kind": "geometry-grid",
             "params": {"axes": [{"start": 0.5, "stop": 1.0, "num": 3}, {"start": 0.0, "stop": 1.0, "num": 2}],
                        "primitive": 4.0}},
}

SMALL_TASKS = {
    "velocity-sweep": ({"kind": "spin-planar", "params": {"spin": 1, "gB": 1.0, "kappa": 1.0}},
                       {"speeds": [0.2, 0.1], "n_periods": 20}),
    "leakage-scan": ({"kind": "two-level", "params": {"offset": [0.5, 0, 0], "matrix": [[0], [0], [1.0]]}},
                     {"rates": [2.0, 1.5, 1.0], "half_span": 8}),
    "trajectory": ({"kind": "spin-affine", "params": {"spin": 0.5, "offset": [0, 0, 1], "matrix": [[1], [0], [0]]}},
                   {"x0": [-1.0], "p0": [2.0], "duration": 2.0,
                    "axes": [{"start": -3, "stop": 3, "num": 61}], "primitive": 10.0}),
    "crossing-scan": ({"kind": "two-level", "params": {"offset": [0, 0, 0], "matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}},
                      {"direction": [1, 2, 2], "radii": {"start": 0.1, "stop": 1.0, "num": 9, "log": True}}),
    "trk": ({"kind": "moving-well", "params": {"profile": "harmonic", "n_points": 241, "spacing": 0.1}},
            {"refinements": 1}),
    "inglis": ({"kind": "cranked-oscillator", "params": {"omega_x": 2.0, "omega_z": 1.0, "n_basis": 10}},
               {"n_occupied": [6, 12]}),
    "order-audit": ({"kind": "spin-affine", "params": {"spin": 0.5, "offset": [0, 0, 1],
                                                       "matrix": [[1, 0], [0, 1], [0, 0]]}},
                    {"center": [0.3, 0.1], "speeds": [0.01, 0.02], "periods": [1.0, 2.0], "n_quad": 32}),
}


def write(tmp_path, doc, name="spec.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


def test_geometry_grid_columns_and_manifest(tmp_path):
    spec = write(tmp_path, GRID)
    assert cli.main(["run", "--spec", str(spec), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    rows = list(csv.reader((tmp_path / "o" / "result.csv").open()))
    assert rows[0] == ["X_theta", "X_phi", "E_n", "A_theta", "A_phi", "g_thetatheta", "g_thetaphi", "g_phiphi",
                       "F_thetaphi", "I_ind_thetatheta", "I_ind_thetaphi", "I_ind_phiphi", "Phi", "Phi_tilde"]
    assert len(rows) == 7
    man = json.loads((tmp_path / "o" / "result.manifest.json").read_text())
    assert len(man["spec_sha256"]) == 64
    assert man["version"]
    assert man["resolved_spec"]["numeric"]["hbar"] == 1.0
    assert man["resolved_spec"]["task"]["params"]["level"] == 0


def test_rerun_is_byte_identical(tmp_path):
    spec = write(tmp_path, GRID)
    outs = []
    for k in range(2):
        cli.main(["run", "--spec", str(spec), "--out", str(tmp_path / f"o{k}"), "--quiet", "--threads", str(k + 1)])
        outs.append((tmp_path / f"o{k}" / "result.csv").read_bytes())
    assert outs[0] == outs[1]


def test_floats_round_trip(tmp_path):
    spec = write(tmp_path, GRID)
    cli.main(["run", "--spec", str(spec), "--out", str(tmp_path), "--quiet"])
    rows = list(csv.reader((tmp_path / "result.csv").open()))[1:]
    for r in rows:
        for v in r:
            assert repr(float(v)) == v


def test_env_var_sets_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envout"))
    spec = write(tmp_path, GRID)
    assert cli.main(["run", "--spec", str(spec), "--quiet"]) == 0
    assert (tmp_path / "envout" / "result.csv").exists()
    assert not list((tmp_path / "envout").glob("*.tmp"))


@pytest.mark.parametrize("task", sorted(SMALL_TASKS))
def test_every_task_runs(tmp_path, task):
    model, params = SMALL_TASKS[task]
    doc = {"model": model, "task": {"kind": task, "params": params}, "output": {"prefix": task}}
    spec = write(tmp_path, doc)
    assert cli.main(["validate", "--spec", str(spec), "--quiet"]) == 0
    assert cli.main(["run", "--spec", str(spec), "--out", str(tmp_path), "--quiet"]) == 0
    rows = list(csv.reader((tmp_path / f"{task}.csv").open()))
    assert len(rows) >= 2


def test_validate_echoes_defaults(tmp_path, capsys):
    spec = write(tmp_path, GRID)
    assert cli.main(["validate", "--spec", str(spec)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("OK")
    assert "gap_rtol" in out and "dt_factor" in out


def test_unknown_model_kind_lists_supported(tmp_path, capsys):
    doc = {**GRID, "model": {"kind": "quark", "params": {}}}
    assert cli.main(["validate", "--spec", str(write(tmp_path, doc))]) == 2
    err = capsys.readouterr().err
    assert "unknown model kind 'quark'" in err and "spin-planar" in err


def test_unknown_keys_rejected(tmp_path, capsys):
    doc = {**GRID, "extras": 1}
    assert cli.main(["validate", "--spec", str(write(tmp_path, doc))]) == 2
    assert "extras" in capsys.readouterr().err


def test_dt_rule_precondition(tmp_path, capsys):
    model, params = SMALL_TASKS["velocity-sweep"]
    doc = {"model": model, "task": {"kind": "velocity-sweep", "params": params}, "numeric": {"dt": 1.0}}
    assert cli.main(["validate", "--spec", str(write(tmp_path, doc))]) == 2
    assert "dt rule" in capsys.readouterr().err


def test_numeric_failure_exit_code(tmp_path):
    doc = {"model": {"kind": "two-level", "params": {"offset": [0, 0, 0], "matrix": [[0.3], [0], [1.0]]}},
           "task": {"kind": "geometry-grid", "params": {"axes": [{"start": -1, "stop": 1, "num": 3}]}}}
    assert cli.main(["run", "--spec", str(write(tmp_path, doc)), "--out", str(tmp_path), "--quiet"]) == 3
    fails = json.loads((tmp_path / "result.failures.json").read_text())
    assert fails[0]["index"] == 1 and "DegeneracyError" in fails[0]["error"]
    assert len((tmp_path / "result.csv").read_text().splitlines()) == 3


def test_missing_spec_is_io_error(tmp_path):
    assert cli.main(["run", "--spec", str(tmp_path / "nope.yaml")]) == 4


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--spec", str(write(tmp_path, GRID)), "--out", str(blocker / "sub"), "--quiet"]) == 4


def test_seed_controls_random_family(tmp_path):
    doc = {"model": {"kind": "random-family", "params": {"dim": 4, "n_params": 1}},
           "task": {"kind": "geometry-grid", "params": {"axes": [{"start": 0, "stop": 1, "num": 2}]}}}
    spec = write(tmp_path, doc)
    texts = []
    for seed in (1, 1, 2):
        cli.main(["run", "--spec", str(spec), "--out", str(tmp_path), "--seed", str(seed), "--quiet"])
        texts.append((tmp_path / "result.csv").read_text())
    assert texts[0] == texts[1] != texts[2]


def test_list_models(capsys):
    assert cli.main(["list-models"]) == 0
    out = capsys.readouterr().out
    for kind in cli.MODEL_SCHEMAS:
        assert kind in out
