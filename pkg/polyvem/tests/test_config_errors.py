from __future__ import annotations

import json
import logging
import os
from pathlib import Path

import pytest

from polyvem.config import RunConfig, load_config_file, worker_count
from polyvem.errors import (
    AcceptanceFailure,
    ConfigError,
    DegenerateFace,
    NotImplementedFormulation,
    NotSPD,
    ParseError,
    SolverBreakdown,
    TopologyError,
    VEMError,
)
from polyvem.logging_setup import configure_logging, log_result


def test_defaults():
    cfg = RunConfig.from_sources(None, {})
    assert cfg.case == "test1"
    assert cfg.solver == "direct"
    assert cfg.output_dir == Path("results")
    assert cfg.timings is True


def test_overrides_beat_file_beat_defaults(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("case: test2\nmesh: annulus:2\nsolver: minres\nseed: 4\n")
    cfg = RunConfig.from_sources(path, {"solver": "direct", "mesh": None, "seed": None})
    assert cfg.case == "test2"
    assert cfg.mesh == "annulus:2"
    assert cfg.solver == "direct"
    assert cfg.seed == 4
    assert cfg.solver_tol == 1e-12


def test_json_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"levels": ["structured:2", "structured:4"], "timings": False}))
    cfg = RunConfig.from_sources(path, {})
    assert cfg.levels == ["structured:2", "structured:4"]
    assert cfg.timings is False


@pytest.mark.parametrize(
    "payload",
    [{"solver": "gmres"}, {"solver_tol": 0.0}, {"levels": ["  "]}, {"case": "test7"}],
)
def test_invalid_run_config(payload):
    with pytest.raises(ConfigError):
        RunConfig.from_sources(None, payload)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config_file(bad)
    listing = tmp_path / "list.yaml"
    listing.write_text("- a\n- b\n")
    with pytest.raises(ConfigError):
        load_config_file(listing)


def test_worker_count_from_env(monkeypatch):
    monkeypatch.setenv("VEM_THREADS", "0")
    assert worker_count() == 1
    monkeypatch.setenv("VEM_THREADS", "100000")
    assert worker_count() == (os.cpu_count() or 1)
    monkeypatch.setenv("VEM_THREADS", "many")
    with pytest.raises(ConfigError):
        worker_count()


@pytest.mark.parametrize(
    "error, reason, code",
    [
        (ConfigError("x"), "invalid_config", 8),
        (NotImplementedFormulation("x"), "formulation_not_implemented", 8),
        (DegenerateFace("x"), "degenerate_face", 4),
        (NotSPD("x"), "not_spd", 5),
        (SolverBreakdown("x"), "solver_breakdown", 7),
        (AcceptanceFailure("x"), "acceptance_failure", 10),
    ],
)
def test_error_payloads(error, reason, code):
    assert isinstance(error, VEMError)
    assert error.to_payload() == {"status": "error", "reason": reason, "message": "x"}
    assert error.exit_code == code


def test_structured_error_payloads():
    parse = ParseError("bad token", line=3, column=7)
    assert str(parse) == "bad token (line 3, column 7)"
    assert parse.to_payload()["line"] == 3
    topo = TopologyError("dangling face", code="dangling")
    assert topo.to_payload()["violation"] == "dangling"
    assert topo.exit_code == 3


def test_configure_logging_writes_dated_file(tmp_path):
    log_file = configure_logging("DEBUG", log_dir=str(tmp_path))
    try:
        assert log_file is not None
        assert Path(log_file).name.startswith("polyvem_")
        log_result("assembled 8 cells")
        log_result("slow factorization", level="warning")
        for handler in logging.getLogger().handlers:
            handler.flush()
        text = Path(log_file).read_text()
        assert "assembled 8 cells" in text
        assert "WARNING polyvem slow factorization" in text
    finally:
        configure_logging("WARNING")
