"""Error norms and magnetic energies evaluated on the cell-wise polynomial projections."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from ..localforms import LocalElementOps
from ..mesh.core import PolyMesh
from ..projections import proj_edge_cell, proj_face_cell
from ..quadrature import cell_rule
from ..spaces import EdgeField, FaceField
from ..system import CaseSpec

ERROR_DEGREE = 6


def cell_averages(H_h: EdgeField, mesh: PolyMesh, local_ops: Optional[Sequence[LocalElementOps]] = None) -> np.ndarray:
    """Π₀H_h per cell, shape (n_cells, 3)."""

    values = np.asarray(H_h, dtype=float)
    out = np.zeros((mesh.n_cells, 3))
    for c in range(mesh.n_cells):
        proj = local_ops[c].edge_projection if local_ops is not None else proj_edge_cell(mesh, c)
        out[c] = proj.matrix @ values[proj.edges]
    return out


def error_L2(
    H_h: EdgeField,
    case: CaseSpec,
    mesh: PolyMesh,
    local_ops: Optional[Sequence[LocalElementOps]] = None,
    weighted: bool = False,
) -> float:
    """‖H - Π₀H_h‖ / ‖H‖ with the degree-6 cell rule; ``weighted`` puts μ inside both integrals."""

    if case.exact_H is None:
        return float("nan")
    averages = cell_averages(H_h, mesh, local_ops)
    mu = case.permeability(mesh) if weighted else np.ones(mesh.n_cells)
    num = den = 0.0
    for c in range(mesh.n_cells):
        points, weights = cell_rule(mesh, c, ERROR_DEGREE)
        exact = case.exact_H(points, int(mesh.subdomain[c]))
        num += mu[c] * float(weights @ np.sum((exact - averages[c]) ** 2, axis=1))
        den += mu[c] * float(weights @ np.sum(exact**2, axis=1))
    return float(np.sqrt(num / den)) if den > 0.0 else float(np.sqrt(num))


def curl_error(
    face_values: FaceField,
    case: CaseSpec,
    mesh: PolyMesh,
    local_ops: Optional[Sequence[LocalElementOps]] = None,
) -> float:
    """‖j - Π₁ψ‖ / ‖j‖ where ψ is a face field (C·H_h after a solve, or j_I with no solve)."""

    values = np.asarray(face_values, dtype=float)
    num = den = 0.0
    for c in range(mesh.n_cells):
        proj = local_ops[c].face_projection if local_ops is not None else proj_face_cell(mesh, c)
        points, weights = cell_rule(mesh, c, ERROR_DEGREE)
        exact = case.current(points, int(mesh.subdomain[c]))
        approx = proj.evaluate(points, values[proj.faces])
        num += float(weights @ np.sum((exact - approx) ** 2, axis=1))
        den += float(weights @ np.sum(exact**2, axis=1))
    return float(np.sqrt(num / den)) if den > 0.0 else float(np.sqrt(num))


@dataclass
class EnergyBreakdown:
    """W per subdomain, ∫ μ|Π₀H_h|² scaled by the case's energy unit."""

    per_subdomain: Dict[str, float]
    reference: Dict[str, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.per_subdomain.values()))

    def relative_errors(self) -> Dict[str, float]:
        return {
            name: abs(self.per_subdomain[name] - ref) / abs(ref)
            for name, ref in self.reference.items()
            if name in self.per_subdomain and ref != 0.0
        }

    def to_dict(self) -> Dict[str, object]:
        return {
            "per_subdomain": dict(self.per_subdomain),
            "total": self.total,
            "reference": dict(self.reference),
            "relative_errors": self.relative_errors(),
        }


def energies(
    H_h: EdgeField,
    case: CaseSpec,
    mesh: PolyMesh,
    local_ops: Optional[Sequence[LocalElementOps]] = None,
    averages: Optional[np.ndarray] = None,
) -> EnergyBreakdown:
    if averages is None:
        averages = cell_averages(H_h, mesh, local_ops)
    mu = case.permeability(mesh)
    density = case.energy_scale * mu * np.sum(averages**2, axis=1) * mesh.cell_volumes
    per_subdomain: Dict[str, float] = {}
    for label in sorted(set(case.subdomain_names) | set(np.unique(mesh.subdomain).tolist())):
        per_subdomain[case.subdomain_name(label)] = float(density[mesh.subdomain == label].sum())
    reference: Mapping[str, float] = case.reference_energies
    if case.analytic_energies is not None:
        reference = case.analytic_energies(mesh)
    return EnergyBreakdown(per_subdomain=per_subdomain, reference=dict(reference))


__all__ = ["cell_averages", "error_L2", "curl_error", "energies", "EnergyBreakdown", "ERROR_DEGREE"]
