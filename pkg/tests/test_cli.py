import csv
import io
import json
import math

import pytest

from sbfem_plate.cli import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VALIDATION,
    WORKERS_ENV,
    config_from_mapping,
    main,
    parse_config,
)
from sbfem_plate.errors import ConfigurationError
from sbfem_plate.material import SI3N4, SUS304

TABLE1 = """
geometry: {a: 1.0, b: 1.0, h: 0.001}
bc: SSSS
analysis: {kind: vibration, modes: 4}
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, TABLE1))
    assert cfg.material.ceramic == SI3N4 and cfg.material.metal == SUS304
    assert (cfg.nex, cfg.nez, cfg.order) == (8, 8, 3)
    assert cfg.material.gradient_index == 0.0
    assert cfg.gradation == "global"
    assert cfg.analysis.kg_mode == "deflection-only"
    assert cfg.analysis.stiffness_form == "consistent"


def test_psi_degrees_to_radians():
    cfg = config_from_mapping({"geometry": {"a": 1, "b": 1, "h": 0.01, "psi_deg": 30},
                               "bc": "SSSS", "analysis": {"kind": "vibration"}})
    assert cfg.geometry.psi == pytest.approx(math.pi / 6)


def test_json_config_accepted(tmp_path):
    doc = {"geometry": {"a": 1, "b": 1, "h": 0.01}, "bc": "CCCC",
           "material": {"ceramic": {"E_GPa": 100}, "gradient_index": 2},
           "analysis": {"kind": "buckling", "load": "biaxial"}}
    cfg = parse_config(write(tmp_path, json.dumps(doc), "cfg.json"))
    assert cfg.material.ceramic.E == pytest.approx(100e9)
    assert cfg.material.ceramic.nu == SI3N4.nu
    assert cfg.analysis.modes == 1


@pytest.mark.parametrize("tree, path", [
    ({"geometry": {"a": 1, "b": 1, "h": 0.01}, "bc": "XSSS", "analysis": {}}, "bc"),
    ({"bc": "SSSS", "analysis": {}}, "geometry"),
    ({"geometry": {"a": 1, "b": 1}, "bc": "SSSS", "analysis": {}}, "geometry.h"),
    ({"geometry": {"a": -1, "b": 1, "h": 0.1}, "bc": "SSSS", "analysis": {}}, "geometry.a"),
    ({"geometry": {"a": 1, "b": 1, "h": 0.1}, "bc": "SSSS", "analysis": {"modes": 0}}, "analysis.modes"),
    ({"geometry": {"a": 1, "b": 1, "h": 0.1}, "bc": "SSSS", "analysis": {"kind": "static"}}, "analysis.kind"),
    ({"geometry": {"a": 1, "b": 1, "h": 0.1, "c": 2}, "bc": "SSSS", "analysis": {}}, "geometry"),
    ({"geometry": {"a": 1, "b": 1, "h": 0.1}, "bc": "SSSS", "analysis": {}, "mesh": {"order": 1}}, "mesh.order"),
    ({"geometry": {"a": 1, "b": 1, "h": 0.1}, "bc": "SSSS", "analysis": {},
      "material": {"metal": {"nu": 0.6}}}, "material.metal"),
    ({"geometry": {"a": "one", "b": 1, "h": 0.1}, "bc": "SSSS", "analysis": {}}, "geometry.a"),
])
def test_config_errors_carry_path(tree, path):
    with pytest.raises(ConfigurationError) as info:
        config_from_mapping(tree)
    assert info.value.path == path


def test_bad_bc_exit_code(tmp_path, capsys):
    p = write(tmp_path, TABLE1.replace("SSSS", "XSSS"))
    assert main(["run", "--config", p]) == EXIT_CONFIG
    assert "bc" in capsys.readouterr().err


def test_unreadable_config_exit_code(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    assert main(["run", "--config", write(tmp_path, "geometry: [1, 2")]) == EXIT_CONFIG


def test_mechanism_exit_code(tmp_path, capsys):
    p = write(tmp_path, "geometry: {a: 1, b: 1, h: 0.01}\nbc: SFFF\nanalysis: {kind: buckling}\n")
    assert main(["run", "--config", p]) == EXIT_NUMERICAL
    assert "mechanism" in capsys.readouterr().err


def test_run_table1_csv(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["run", "--config", write(tmp_path, TABLE1), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out.read_text())
    assert list(rows[0]) == ["mode_index", "raw_eigenvalue", "nondimensional_value"]
    assert len(rows) == 4
    assert float(rows[0]["nondimensional_value"]) == pytest.approx(1.9995, rel=5e-3)
    # six significant digits
    assert all(len(r["nondimensional_value"].replace(".", "").lstrip("0")) <= 6 for r in rows)


def test_run_is_deterministic(tmp_path, capsys):
    p = write(tmp_path, TABLE1)
    main(["run", "--config", p, "--format", "json"])
    first = capsys.readouterr().out
    main(["run", "--config", p, "--format", "json"])
    assert capsys.readouterr().out == first


def test_run_buckling_json_metadata(tmp_path, capsys):
    p = write(tmp_path, TABLE1.replace("vibration, modes: 4", "buckling, load: uniaxial"))
    assert main(["run", "--config", p, "--format", "json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["result"]["nondimensional_value"][0] == pytest.approx(4.0, rel=5e-3)
    meta = doc["metadata"]
    for key in ("kg_mode", "elasticity_matrix", "omega_definition", "stiffness_asymmetry",
                "stiffness_form", "gradation", "edge_conditions"):
        assert key in meta
    assert meta["kg_mode"] == "deflection-only"
    assert meta["stiffness_asymmetry"] < 1e-8


def test_run_scsc_skew(tmp_path, capsys):
    p = write(tmp_path, "geometry: {a: 1, b: 1, h: 0.01, psi_deg: 30}\nbc: SCSC\n"
                        "analysis: {kind: vibration, modes: 1}\noutput: {format: json}\n")
    assert main(["run", "--config", p]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["result"]["nondimensional_value"][0] == pytest.approx(3.7555, rel=0.015)
    assert doc["metadata"]["scsc_assignment"].startswith("SCSC")


def test_mesh_dump(tmp_path, capsys):
    mesh = tmp_path / "mesh.csv"
    cfg = TABLE1 + "mesh: {nex: 2, order: 2}\n"
    assert main(["run", "--config", write(tmp_path, cfg), "--mesh-csv", str(mesh)]) == EXIT_OK
    lines = mesh.read_text().splitlines()
    assert lines[0] == "node,x,y" and len(lines) == 26


def test_sweep_single_value_equals_run(tmp_path, capsys):
    p = write(tmp_path, TABLE1.replace("h: 0.001", "h: 0.01") + "mesh: {nex: 4}\n")
    main(["run", "--config", p])
    run_rows = read_csv(capsys.readouterr().out)
    assert main(["sweep", "--config", p, "--parameter", "n", "--values", "0"]) == EXIT_OK
    sweep_rows = read_csv(capsys.readouterr().out)
    assert len(sweep_rows) == 1
    for k, r in enumerate(run_rows, start=1):
        assert sweep_rows[0][f"omega_{k}"] == r["nondimensional_value"]


def test_sweep_gradient_index_trend(tmp_path, capsys):
    p = write(tmp_path, TABLE1.replace("h: 0.001", "h: 0.01") + "mesh: {nex: 4}\n")
    assert main(["sweep", "--config", p, "--parameter", "n", "--values", "0,1,5,10"]) == EXIT_OK
    om = [float(r["omega_1"]) for r in read_csv(capsys.readouterr().out)]
    assert all(b < a for a, b in zip(om, om[1:]))


def test_sweep_buckling_columns_and_nan_rows(tmp_path, capsys):
    p = write(tmp_path, "geometry: {a: 1, b: 1, h: 0.01}\nbc: SSSS\nmesh: {nex: 2}\n"
                        "analysis: {kind: buckling}\n")
    with pytest.warns(RuntimeWarning, match="psi=95"):
        assert main(["sweep", "--config", p, "--parameter", "psi", "--values", "0,95"]) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert list(rows[0]) == ["psi", "lambda_cru", "lambda_crb"]
    assert rows[1]["lambda_cru"] == "nan"


def test_sweep_parallel_matches_serial(tmp_path, capsys, monkeypatch):
    p = write(tmp_path, TABLE1.replace("h: 0.001", "h: 0.01") + "mesh: {nex: 2}\n")
    args = ["sweep", "--config", p, "--parameter", "a_over_b", "--values", "0.5,1,2"]
    main(args)
    serial = capsys.readouterr().out
    monkeypatch.setenv(WORKERS_ENV, "3")
    main(args)
    assert capsys.readouterr().out == serial
    monkeypatch.setenv(WORKERS_ENV, "zero")
    assert main(args) == EXIT_CONFIG


def test_sweep_length_scale_flag(tmp_path, capsys):
    p = write(tmp_path, TABLE1 + "mesh: {nex: 4}\n")
    main(["sweep", "--config", p, "--parameter", "a_over_b", "--values", "2"])
    by_a = float(read_csv(capsys.readouterr().out)[0]["omega_1"])
    main(["sweep", "--config", p, "--parameter", "a_over_b", "--values", "2", "--length-scale", "b"])
    by_b = float(read_csv(capsys.readouterr().out)[0]["omega_1"])
    assert by_a == pytest.approx(5.0, rel=5e-3)
    assert by_b == pytest.approx(by_a / 4, rel=1e-5)


def test_converge(tmp_path, capsys):
    assert main(["converge", "--config", write(tmp_path, TABLE1), "--meshes", "2,4"]) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert [r["mesh"] for r in rows] == ["2x2", "4x4"]
    assert float(rows[0]["omega_1"]) == pytest.approx(2.0035, rel=5e-3)
    assert float(rows[1]["lambda_cru"]) == pytest.approx(4.0010, rel=5e-3)
    assert rows[0]["delta_omega"] == "nan"


def _mini_reference(tmp_path, value):
    doc = {"T1": {"title": "mini", "rules": {"tolerance": 0.005}, "cells": [
        {"bc": "SSSS", "b_over_h": 1000, "psi_deg": 0, "n": 0, "mesh": [2, 2],
         "quantity": "omega", "mode": 1, "value": value}]}}
    return write(tmp_path, json.dumps(doc), "ref.json")


def test_validate_pass_and_intentional_failure(tmp_path, capsys):
    good = _mini_reference(tmp_path, 2.0035)
    assert main(["validate", "--reference", good]) == EXIT_OK
    bad = _mini_reference(tmp_path, 2.5)
    assert main(["validate", "--reference", bad]) == EXIT_VALIDATION
    captured = capsys.readouterr()
    assert "fail" in captured.out
    assert "T1: 0/1" in captured.err


def test_validate_unknown_table(tmp_path):
    assert main(["validate", "--reference", _mini_reference(tmp_path, 2.0), "--tables", "T9"]) == EXIT_CONFIG


def test_validate_bad_reference_file(tmp_path):
    assert main(["validate", "--reference", write(tmp_path, "{", "r.json")]) == EXIT_CONFIG
