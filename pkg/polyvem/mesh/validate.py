"""Invariant checks and quality metrics for :class:`PolyMesh` (report-only)."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from ..config import VEMConfig
from ..errors import TopologyError
from .core import PolyMesh

logger = logging.getLogger(__name__)

ORIENTATION_TOL = 1e-12


@dataclass
class Violation:
    code: str
    entity: str
    index: int
    message: str

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)
    cell_metrics: Optional[pd.DataFrame] = None
    face_planarity: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def first_violation(self) -> Optional[Violation]:
        return self.violations[0] if self.violations else None

    def raise_if_invalid(self) -> None:
        first = self.first_violation()
        if first is not None:
            raise TopologyError(f"{first.entity} {first.index}: {first.message}", code=first.code)

    def summary(self) -> Dict[str, Any]:
        metrics = self.cell_metrics
        out: Dict[str, Any] = {
            "status": "ok" if self.ok else "invalid",
            "violations": [v.to_dict() for v in self.violations[:50]],
            "n_violations": len(self.violations),
        }
        if metrics is not None and not metrics.empty:
            out["metrics"] = {
                "h_max": float(metrics["h_P"].max()),
                "h_mean": float(metrics["h_P"].mean()),
                "min_edge_ratio": float(metrics["min_edge_ratio"].min()),
                "min_face_ratio": float(metrics["min_face_ratio"].min()),
                "min_star_ratio": float(metrics["star_ratio"].min()),
                "max_planarity": float(self.face_planarity.max()) if self.face_planarity is not None else 0.0,
            }
        return out


def _star_ratio(mesh: PolyMesh, c: int) -> float:
    """Largest inscribed-distance / h_P over a few candidate centers.

    A positive value means the candidate sees every face from inside (the cell
    is star-shaped with respect to a ball of that relative radius). Candidates
    are the barycenter and midpoints towards each face barycenter; nothing is
    certified.
    """

    cell = mesh.cells[c]
    normals = mesh.face_normals[cell.index] * cell.sign[:, None]
    centers = mesh.face_barycenters[cell.index]
    bary = mesh.cell_barycenters[c]
    candidates = np.vstack([bary[None, :], 0.5 * (bary[None, :] + centers)])
    # signed distance of each candidate to each face plane, positive inside
    dist = np.einsum("fj,fj->f", centers, normals)[None, :] - candidates @ normals.T
    return float(dist.min(axis=1).max() / mesh.cell_diameters[c])


def validate(mesh: PolyMesh, planarity_tol: Optional[float] = None) -> ValidationReport:
    tol = VEMConfig.PLANARITY_TOL if planarity_tol is None else planarity_tol
    report = ValidationReport()
    add = report.violations.append

    nv, ne, nf = mesh.n_vertices, mesh.n_edges, mesh.n_faces
    if ne and (mesh.edges.min() < 0 or mesh.edges.max() >= nv):
        add(Violation("index_range", "edge", -1, "edge references a missing vertex"))
        return report
    for e in np.flatnonzero(mesh.edges[:, 0] == mesh.edges[:, 1]):
        add(Violation("degenerate_edge", "edge", int(e), "tail equals head"))
    for c, cell in enumerate(mesh.cells):
        if cell.index.size and (cell.index.min() < 0 or cell.index.max() >= nf):
            add(Violation("index_range", "cell", c, "cell references a missing face"))
            return report
    for f, face in enumerate(mesh.faces):
        if face.index.size < 3 or face.index.min() < 0 or face.index.max() >= ne:
            add(Violation("index_range", "face", f, "face needs at least 3 existing edges"))
            return report

    # face reference counts and opposite signs
    for f, refs in enumerate(mesh.face_cells):
        count = len(refs)
        if count == 0 or count > 2:
            add(Violation("face_reference_count", "face", f, f"referenced by {count} cells"))
        elif count == 2 and refs[0][1] == refs[1][1]:
            add(Violation("orientation", "face", f, "both cells carry the same sign"))
        if count in (1, 2) and bool(mesh.boundary_face[f]) != (count == 1):
            add(Violation("boundary_flag", "face", f, f"boundary flag disagrees with {count} references"))

    # closed loops
    for f, face in enumerate(mesh.faces):
        pairs = mesh.edges[face.index]
        start = np.where(face.sign > 0, pairs[:, 0], pairs[:, 1])
        end = np.where(face.sign > 0, pairs[:, 1], pairs[:, 0])
        if not np.array_equal(end, np.roll(start, -1)):
            add(Violation("loop_closure", "face", f, "signed edges do not chain cyclically"))

    # planarity
    planarity = mesh.face_planarity
    for f in np.flatnonzero(planarity > tol * mesh.face_diameters):
        add(
            Violation(
                "planarity",
                "face",
                int(f),
                f"residual {planarity[f]:.3e} above {tol:g} * h_f",
            )
        )
    for f in np.flatnonzero(mesh.face_areas <= 0.0):
        add(Violation("degenerate_face", "face", int(f), "zero area"))

    rows = []
    for c, cell in enumerate(mesh.cells):
        n_v = mesh.cell_vertices[c].size
        n_e = mesh.cell_edges[c].size
        n_f = cell.index.size
        if n_e - (n_v - 1) != n_f - 1:
            add(Violation("euler", "cell", c, f"N_e - (N_v - 1) = {n_e - n_v + 1} but N_f - 1 = {n_f - 1}"))
        areas = mesh.face_areas[cell.index]
        closure = (cell.sign[:, None] * areas[:, None] * mesh.face_normals[cell.index]).sum(axis=0)
        if np.linalg.norm(closure) > ORIENTATION_TOL * areas.sum():
            add(Violation("orientation", "cell", c, f"sum of signed face areas {np.linalg.norm(closure):.3e}"))
        if mesh.cell_volumes[c] <= 0.0:
            add(Violation("orientation", "cell", c, f"non-positive volume {mesh.cell_volumes[c]:.3e}"))
        h_p = float(mesh.cell_diameters[c])
        rows.append(
            {
                "cell": c,
                "subdomain": int(mesh.subdomain[c]),
                "volume": float(mesh.cell_volumes[c]),
                "h_P": h_p,
                "min_edge_ratio": float(mesh.edge_lengths[mesh.cell_edges[c]].min() / h_p) if h_p else 0.0,
                "min_face_ratio": float(mesh.face_diameters[cell.index].min() / h_p) if h_p else 0.0,
                "max_planarity": float(planarity[cell.index].max()),
                "star_ratio": _star_ratio(mesh, c) if h_p else 0.0,
            }
        )
    report.cell_metrics = pd.DataFrame(rows)
    report.face_planarity = planarity
    if report.violations:
        logger.warning("mesh validation found %d violations; first: %s", len(report.violations), report.violations[0])
    else:
        logger.info("mesh validation passed for %s", mesh.summary())
    return report


__all__ = ["Violation", "ValidationReport", "validate"]
