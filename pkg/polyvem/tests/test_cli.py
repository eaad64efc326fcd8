from __future__ import annotations

import json

import pytest

from polyvem import __version__
from polyvem.cli import build_parser, main
from polyvem.mesh import generate_structured_hex
from polyvem.mesh.io import mesh_to_document


def _stdout(capsys):
    return json.loads(capsys.readouterr().out)


def _error(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    return json.loads(lines[-1])


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_mesh_gen_validate_and_convert(tmp_path, capsys):
    target = tmp_path / "grid.json"
    assert main(["mesh", "gen", "--structured", "2", "-o", str(target)]) == 0
    payload = _stdout(capsys)
    assert payload["status"] == "ok"
    assert payload["mesh"] == {"vertices": 27, "edges": 54, "faces": 36, "cells": 8}
    assert target.exists()

    assert main(["mesh", "validate", str(target)]) == 0
    assert _stdout(capsys)["validation"]["status"] == "ok"

    vtk = tmp_path / "grid.vtk"
    assert main(["mesh", "convert", str(target), "-o", str(vtk), "--to", "vtk-polyhedral"]) == 0
    assert _stdout(capsys)["mesh"]["cells"] == 8
    assert vtk.read_text().startswith("# vtk DataFile")


def test_mesh_gen_from_descriptor(tmp_path, capsys):
    target = tmp_path / "hex.vtk"
    assert main(["mesh", "gen", "--mesh", "hexagon:2", "-o", str(target)]) == 0
    assert _stdout(capsys)["mesh"]["cells"] == 2


def test_broken_mesh_exits_with_topology_code(tmp_path, capsys):
    mesh = generate_structured_hex(2)
    doc = mesh_to_document(mesh)
    refs = doc["cells"][0]["faces"]
    k = next(i for i, ref in enumerate(refs) if not mesh.boundary_face[abs(ref) - 1])
    refs[k] = -refs[k]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    assert main(["mesh", "validate", str(path)]) == 3
    error = _error(capsys)
    assert error["status"] == "error"
    assert error["reason"] == "topology_violation"
    assert error["violation"] == "orientation"


def test_missing_mesh_file_is_parse_error(tmp_path, capsys):
    assert main(["mesh", "validate", str(tmp_path / "absent.json")]) == 2
    assert _error(capsys)["reason"] == "parse_error"


def test_undecodable_mesh_file_exits_2(tmp_path, capsys):
    path = tmp_path / "mesh.json"
    path.write_bytes(b"\xff\xfe{}")
    assert main(["mesh", "validate", str(path)]) == 2
    assert _error(capsys)["reason"] == "parse_error"


def test_audit_reports_exact_sequence(capsys):
    assert main(["mesh", "audit", "--mesh", "structured:2", "--rank-check"]) == 0
    payload = _stdout(capsys)
    assert payload["audit"]["ok"] is True
    assert payload["audit"]["rank_grad"] == 26


def test_solve_smoke(tmp_path, capsys):
    vtk = tmp_path / "out" / "test1.vtk"
    report = tmp_path / "out" / "test1.json"
    argv = ["solve", "--case", "test1", "--mesh", "structured:3", "--export-vtk", str(vtk), "--export-json", str(report)]
    assert main(argv) == 0
    payload = _stdout(capsys)
    assert payload["case"] == "test1"
    assert payload["n_edge_dofs"] == 36
    assert payload["p_inf"] < 1e-8
    assert vtk.exists() and "CELL_DATA" in vtk.read_text()
    assert json.loads(report.read_text())["case"] == "test1"


def test_solve_from_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("case: test1\nmesh: perturbed:2:0.1:5\nsolver: minres\nsolver_tol: 1.0e-8\n")
    assert main(["solve", "--config", str(cfg)]) == 0
    payload = _stdout(capsys)
    assert payload["mesh_descriptor"] == "perturbed:2:0.1:5"
    assert payload["solver"]["solver"] == "minres"


def test_convergence_csv_is_reproducible(tmp_path, capsys):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["convergence", "--case", "test1", "--levels", "structured:2", "structured:3", "--no-timings"]
    assert main(base + ["--output-csv", str(first)]) == 0
    summary = _stdout(capsys)
    assert summary["levels"] == ["structured:2", "structured:3"]
    assert main(base + ["--output-csv", str(second)]) == 0
    capsys.readouterr()
    assert first.read_bytes() == second.read_bytes()
    header = first.read_text().splitlines()[0].split(",")
    assert header[:4] == ["level", "h", "n_edge_dofs", "n_vertex_dofs"]
    assert header[-2:] == ["t_assemble_s", "t_solve_s"]


def test_convergence_default_output_dir(tmp_path, capsys):
    argv = ["convergence", "--case", "test1", "--family", "structured", "--levels", "2", "3", "--output-dir", str(tmp_path)]
    assert main(argv) == 0
    assert _stdout(capsys)["csv"] == str(tmp_path / "convergence_test1.csv")
    assert (tmp_path / "convergence_test1.csv").exists()


def test_assert_rate_failure_exit_code(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr("polyvem.cli.RATE_WINDOW", (10.0, 20.0))
    argv = ["convergence", "--case", "test1", "--levels", "structured:2", "structured:3"]
    argv += ["--output-csv", str(tmp_path / "rate.csv"), "--assert-rate"]
    assert main(argv) == 10
    assert _error(capsys)["reason"] == "acceptance_failure"


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--case", "from-file", "--mesh", "structured:2"],
        ["solve", "--case", "test1", "--mesh", "structured:2", "--tol", "2.0"],
        ["solve", "--case", "test1", "--mesh", "bogus:2"],
    ],
)
def test_configuration_errors_exit_8(argv, capsys):
    assert main(argv) == 8
    assert _error(capsys)["reason"] == "invalid_config"


def test_dirichlet_on_single_cell_exits_6(capsys):
    assert main(["solve", "--case", "test1", "--mesh", "structured:1"]) == 6
    assert _error(capsys)["reason"] == "empty_interior"


def test_case_file_run(tmp_path, capsys):
    case = tmp_path / "case.json"
    case.write_text(json.dumps({"name": "slab", "bc": "neumann", "mu": {"0": 2.0}, "current": {"0": [0.0, 0.0, 1.0]}}))
    assert main(["solve", "--case", "from-file", "--case-file", str(case), "--mesh", "structured:2"]) == 0
    payload = _stdout(capsys)
    assert payload["case"] == "slab"
    assert payload["err_H_L2"] is None


def test_incompatible_case_file_exits_8(tmp_path, capsys):
    case = tmp_path / "case.json"
    case.write_text(json.dumps({"mu": {"0": 1.0, "1": 1.0, "2": 1.0}, "current": {"0": [1.0, 0.0, 0.0]}}))
    assert main(["solve", "--case", "from-file", "--case-file", str(case), "--mesh", "annulus:1"]) == 8
    error = _error(capsys)
    assert error["reason"] == "invalid_config"
    assert "divergence-free" in error["message"]
