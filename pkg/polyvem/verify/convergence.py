"""
convergence.py — одиночні розв'язки та серії згущень з оцінкою порядку збіжності
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import ConfigError
from ..mesh.core import PolyMesh
from ..mesh.generators import parse_mesh_descriptor
from ..spaces import EdgeField, FaceField, VertexField
from ..system import CaseSpec, SaddleSystem, SolveStats, assemble, solve
from .cases import check_current_compatibility
from .norms import EnergyBreakdown, cell_averages, curl_error, energies, error_L2

logger = logging.getLogger(__name__)

RATE_WINDOW = (0.8, 1.2)
CSV_FLOAT_FORMAT = "%.12e"


@dataclass(eq=False)
class CaseResult:
    case: CaseSpec
    mesh: PolyMesh
    system: SaddleSystem
    H: EdgeField
    p: VertexField
    stats: SolveStats
    averages: np.ndarray
    err_H_L2: float
    err_H_L2_mu: float
    err_curl: float
    err_curl_interp: float
    energies: EnergyBreakdown

    @property
    def t_assemble(self) -> float:
        return self.system.t_assemble

    @property
    def t_solve(self) -> float:
        return self.stats.t_solve

    def to_dict(self, timings: bool = True) -> Dict[str, Any]:
        stats = self.stats.to_dict()
        if not timings:
            stats.pop("t_solve", None)
        payload: Dict[str, Any] = {
            "case": self.case.name,
            "bc": self.case.bc,
            "mesh": self.mesh.summary(),
            "h": float(self.mesh.mesh_size),
            "n_edge_dofs": int(self.system.free_edges.size),
            "n_vertex_dofs": int(self.system.free_vertices.size),
            "err_H_L2": self.err_H_L2,
            "err_H_L2_mu": self.err_H_L2_mu,
            "err_curl": self.err_curl,
            "err_curl_interp": self.err_curl_interp,
            "p_inf": self.stats.p_inf,
            "energies": self.energies.to_dict(),
            "spectra": self.system.spectral_bounds(),
            "solver": stats,
        }
        if timings:
            payload["t_assemble_s"] = self.t_assemble
        return payload


def solve_case(
    case: CaseSpec,
    mesh: PolyMesh,
    solver: Optional[str] = None,
    tol: Optional[float] = None,
) -> CaseResult:
    if case.piecewise_current:
        check_current_compatibility(case, mesh)
    system = assemble(case, mesh)
    H, p, stats = solve(system, solver=solver, tol=tol)
    ops = system.local_ops
    averages = cell_averages(H, mesh, ops)
    curl_h = FaceField(system.curl @ H.values)
    result = CaseResult(
        case=case,
        mesh=mesh,
        system=system,
        H=H,
        p=p,
        stats=stats,
        averages=averages,
        err_H_L2=error_L2(H, case, mesh, ops),
        err_H_L2_mu=error_L2(H, case, mesh, ops, weighted=True),
        err_curl=curl_error(curl_h, case, mesh, ops),
        err_curl_interp=curl_error(system.current, case, mesh, ops),
        energies=energies(H, case, mesh, ops, averages=averages),
    )
    logger.info(
        "%s on %d cells: err_H_L2 %.4e, err_curl %.4e, p_inf %.2e",
        case.name,
        mesh.n_cells,
        result.err_H_L2,
        result.err_curl,
        stats.p_inf,
    )
    return result


def fit_rate(h: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)."""

    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    mask = np.isfinite(errors) & (errors > 0.0) & (h > 0.0)
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(h[mask]), np.log(errors[mask]), 1)[0])


@dataclass
class ConvergenceReport:
    case: str
    family: str
    rows: pd.DataFrame
    rates: Dict[str, float] = field(default_factory=dict)

    @property
    def rate(self) -> float:
        return self.rates.get("err_H_L2", float("nan"))

    @property
    def monotone(self) -> bool:
        err = self.rows["err_H_L2"].to_numpy(dtype=float)
        if not np.all(np.isfinite(err)):
            return False
        return bool(np.all(np.diff(err) < 0.0))

    def energy_trend(self) -> Dict[str, bool]:
        """Whether each relative energy deviation strictly shrinks under refinement."""

        trend = {}
        for col in self.rows.columns:
            if col.startswith("W_") and col.endswith("_rel_err"):
                values = self.rows[col].to_numpy(dtype=float)
                trend[col[2:-8]] = bool(np.all(np.diff(values) < 0.0))
        return trend

    def rate_within(self, window=RATE_WINDOW) -> bool:
        lo, hi = window
        return bool(np.isfinite(self.rate) and lo <= self.rate <= hi)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.rows.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        return path

    def summary(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "family": self.family,
            "levels": self.rows["level"].tolist(),
            "rates": {k: (None if not np.isfinite(v) else v) for k, v in self.rates.items()},
            "monotone": self.monotone,
            "energy_trend": self.energy_trend(),
        }


def _descriptor(family: str, level: Union[int, str]) -> str:
    level = str(level)
    return level if ":" in level else f"{family}:{level}"


def _family_of(levels: Sequence[Union[int, str]]) -> Optional[str]:
    """Common ``kind`` of fully spelled descriptors, or None when levels are bare or mixed."""

    kinds = {str(level).partition(":")[0] for level in levels if ":" in str(level)}
    if len(kinds) == 1 and all(":" in str(level) for level in levels):
        return kinds.pop()
    return None


def convergence_row(result: CaseResult, level: str, timings: bool = True) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        "level": level,
        "h": float(result.mesh.mesh_size),
        "n_edge_dofs": int(result.system.free_edges.size),
        "n_vertex_dofs": int(result.system.free_vertices.size),
        "err_H_L2": result.err_H_L2,
        "err_H_L2_mu": result.err_H_L2_mu,
        "err_curl": result.err_curl,
        "err_curl_interp": result.err_curl_interp,
        "curl_residual": result.stats.curl_residual,
        "p_inf": result.stats.p_inf,
    }
    for name, value in result.energies.per_subdomain.items():
        row[f"W_{name}"] = value
    for name, value in result.energies.relative_errors().items():
        row[f"W_{name}_rel_err"] = value
    row["t_assemble_s"] = result.t_assemble if timings else 0.0
    row["t_solve_s"] = result.t_solve if timings else 0.0
    return row


def run_convergence(
    case: CaseSpec,
    mesh_family: Optional[str],
    levels: Sequence[Union[int, str]],
    solver: Optional[str] = None,
    tol: Optional[float] = None,
    timings: bool = True,
) -> ConvergenceReport:
    """Solve on each level in order; levels are ints (``family:level``) or full descriptors.

    Without ``mesh_family`` the report is labelled by the kind shared by all
    descriptors, falling back to the case family.
    """

    if not levels:
        raise ConfigError("convergence study needs at least one level")
    family = mesh_family or _family_of(levels) or case.mesh_family
    rows: List[Dict[str, Any]] = []
    for level in levels:
        descriptor = _descriptor(family, level)
        mesh = parse_mesh_descriptor(descriptor, family_alias=case.mesh_family)
        logger.info("convergence %s: level %s (%d cells)", case.name, descriptor, mesh.n_cells)
        result = solve_case(case, mesh, solver=solver, tol=tol)
        rows.append(convergence_row(result, descriptor, timings))

    table = pd.DataFrame(rows)
    h = table["h"].to_numpy(dtype=float)
    if np.any(np.diff(h) >= 0.0):
        raise ConfigError(f"levels must refine: mesh sizes {h.tolist()} are not strictly decreasing")
    rates = {
        "err_H_L2": fit_rate(h, table["err_H_L2"]),
        "err_H_L2_mu": fit_rate(h, table["err_H_L2_mu"]),
        "err_curl": fit_rate(h, table["err_curl"]),
    }
    report = ConvergenceReport(case=case.name, family=family, rows=table, rates=rates)
    logger.info("convergence %s/%s: fitted L2 rate %.3f", case.name, family, report.rate)
    return report


__all__ = [
    "CaseResult",
    "ConvergenceReport",
    "solve_case",
    "run_convergence",
    "convergence_row",
    "fit_rate",
    "RATE_WINDOW",
]
