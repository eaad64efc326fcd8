"""
config.py — конфігурація polyvem (змінні середовища + модель запуску CLI)
"""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from .errors import ConfigError


class VEMConfig:
    # Паралельна збірка локальних матриць (кількість потоків)
    THREADS = int(os.getenv("VEM_THREADS", "1"))
    # Геометричні допуски
    PLANARITY_TOL = float(os.getenv("VEM_PLANARITY_TOL", "1e-9"))          # відносно h_f
    GRAM_COND_MAX = float(os.getenv("VEM_GRAM_COND_MAX", "1e12"))
    NONPLANAR_POLICY = os.getenv("VEM_NONPLANAR_POLICY", "split")          # split | project
    REPLANARIZE_SWEEPS = int(os.getenv("VEM_REPLANARIZE_SWEEPS", "25"))
    PERTURBATION_MAX = 0.3
    CLAMP_PERTURBATION = bool(int(os.getenv("VEM_CLAMP_PERTURBATION", "0")))

    # Розв'язувач
    SOLVER = os.getenv("VEM_SOLVER", "direct")                             # direct | minres
    SOLVER_TOL = float(os.getenv("VEM_SOLVER_TOL", "1e-12"))
    SOLVER_MAXITER = int(os.getenv("VEM_SOLVER_MAXITER", "5000"))
    FORMULATION = os.getenv("VEM_FORMULATION", "kikuchi")                  # kikuchi | grad-augmented

    # Аудит
    RANK_CHECK_MAX_EDGES = int(os.getenv("VEM_RANK_CHECK_MAX_EDGES", "2500"))

    # Логування
    LOG_LEVEL = os.getenv("VEM_LOG_LEVEL", "INFO")
    LOG_DIR = os.getenv("VEM_LOG_DIR") or None


def worker_count() -> int:
    """Number of threads for per-cell maps, read at call time so tests can patch the env."""

    raw = os.getenv("VEM_THREADS")
    try:
        value = int(raw) if raw is not None else VEMConfig.THREADS
    except ValueError as exc:
        raise ConfigError(f"VEM_THREADS must be an integer, got {raw!r}") from exc
    return max(1, min(value, os.cpu_count() or 1))


CaseName = Literal["test1", "test2", "test3", "from-file"]


class RunConfig(BaseModel):
    """Validated description of one CLI run."""

    case: CaseName = "test1"
    mesh: str = "structured:4"
    family: Optional[str] = None
    levels: list[str] = Field(default_factory=list)
    solver: Literal["direct", "minres"] = "direct"
    solver_tol: float = 1e-12
    output_dir: Path = Path("results")
    case_file: Optional[Path] = None
    export_csv: Optional[Path] = None
    export_vtk: Optional[Path] = None
    export_json: Optional[Path] = None
    seed: int = 0
    timings: bool = True

    @field_validator("solver_tol")
    @classmethod
    def _positive_tol(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("solver_tol must lie in (0, 1)")
        return value

    @field_validator("levels")
    @classmethod
    def _levels_not_blank(cls, value: list[str]) -> list[str]:
        if any(not item.strip() for item in value):
            raise ValueError("levels must be non-empty mesh descriptors")
        return value

    @classmethod
    def from_sources(cls, file_path: Optional[Path], overrides: Dict[str, Any]) -> "RunConfig":
        """Merge defaults < config file < explicit overrides (``None`` values are ignored)."""

        data: Dict[str, Any] = {}
        if file_path is not None:
            data.update(load_config_file(file_path))
        data.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return cls(**data)
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc


def load_config_file(path: Path) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        if path.suffix.lower() in {".yaml", ".yml"}:
            payload = yaml.safe_load(text) or {}
        else:
            payload = json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid config file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return payload


__all__ = ["VEMConfig", "RunConfig", "worker_count", "load_config_file"]
