"""Cell-data VTK fields and JSON reports for solved cases."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from .mesh.io import write_vtk_polyhedra
from .verify.convergence import CaseResult

logger = logging.getLogger(__name__)


def cell_fields(result: CaseResult) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
    """Cell values at the barycenters: H = Π₀H_h and B = scale·μ·Π₀H_h, plus magnitudes and B·H.

    μ is constant per cell and the L² projection onto P₁ keeps the cell mean,
    so Π₁(μH_h) takes the value μΠ₀H_h at the barycenter.
    """

    mu = result.case.permeability(result.mesh)
    H = result.averages
    B = result.case.energy_scale * mu[:, None] * H
    scalars = {
        "mu": mu,
        "H_magnitude": np.linalg.norm(H, axis=1),
        "B_magnitude": np.linalg.norm(B, axis=1),
        "energy_density": np.einsum("ij,ij->i", B, H),
    }
    return scalars, {"H": H, "B": B}


def export_vtk(result: CaseResult, path: Union[str, Path]) -> Path:
    scalars, vectors = cell_fields(result)
    out = write_vtk_polyhedra(
        result.mesh,
        path,
        cell_scalars=scalars,
        cell_vectors=vectors,
        title=f"polyvem {result.case.name}",
    )
    logger.info("wrote %s (%d cells)", out, result.mesh.n_cells)
    return out


def _clean(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def to_json(payload: Dict[str, Any]) -> str:
    """JSON text with NaN/inf mapped to null and numpy scalars unwrapped."""

    return json.dumps(_clean(payload), ensure_ascii=False, indent=2, sort_keys=True)


def write_json(payload: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(payload) + "\n", encoding="utf-8")
    return path


__all__ = ["cell_fields", "export_vtk", "to_json", "write_json"]
