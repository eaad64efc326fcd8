"""Stabilized local scalar products for the edge and face spaces."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import NonPositivePermeability, NotSPD
from .mesh.core import PolyMesh
from .projections import (
    CellEdgeProjection,
    CellFaceProjection,
    FaceEdgeProjection,
    proj_edge_cell,
    proj_face_cell,
)

logger = logging.getLogger(__name__)


def _check_spd(matrix: np.ndarray, label: str) -> Tuple[float, float]:
    eig = np.linalg.eigvalsh(matrix)
    if not np.all(np.isfinite(eig)) or eig[0] <= 0.0:
        raise NotSPD(f"{label}: smallest eigenvalue {eig[0]:.3e}")
    return float(eig[0]), float(eig[-1])


def edge_mass(
    mesh: PolyMesh,
    c: int,
    projection: Optional[CellEdgeProjection] = None,
    face_ops: Optional[Sequence[FaceEdgeProjection]] = None,
) -> np.ndarray:
    """[v, w] = |P| Π₀v·Π₀w + h_P² Σ_e |e| (v·t_e - Π₀v·t_e)(w·t_e - Π₀w·t_e), v·t_e = dof_e/|e|."""

    projection = projection or proj_edge_cell(mesh, c, face_ops)
    edges = projection.edges
    lengths = mesh.edge_lengths[edges]
    p0 = projection.matrix
    residual = np.diag(1.0 / lengths) - mesh.edge_tangents[edges] @ p0
    h = float(mesh.cell_diameters[c])
    matrix = float(mesh.cell_volumes[c]) * p0.T @ p0 + h * h * residual.T @ (lengths[:, None] * residual)
    matrix = 0.5 * (matrix + matrix.T)
    _check_spd(matrix, f"cell {c} edge form")
    return matrix


def face_mass(mesh: PolyMesh, c: int, projection: Optional[CellFaceProjection] = None) -> np.ndarray:
    """[ψ, φ] = |P| Π₀ψ·Π₀φ + h_P Σ_f |f| (ψ·n_f - Π₀ψ·n_f)(φ·n_f - Π₀φ·n_f), ψ·n_f = dof_f/|f|."""

    projection = projection or proj_face_cell(mesh, c)
    faces = projection.faces
    areas = mesh.face_areas[faces]
    p0 = projection.pi0
    residual = np.diag(1.0 / areas) - mesh.face_normals[faces] @ p0
    h = float(mesh.cell_diameters[c])
    matrix = float(mesh.cell_volumes[c]) * p0.T @ p0 + h * residual.T @ (areas[:, None] * residual)
    matrix = 0.5 * (matrix + matrix.T)
    _check_spd(matrix, f"cell {c} face form")
    return matrix


def weighted_edge_mass(
    mesh: PolyMesh, c: int, mu: float, matrix: Optional[np.ndarray] = None
) -> np.ndarray:
    if not mu > 0.0:
        raise NonPositivePermeability(f"cell {c}: permeability must be positive, got {mu}")
    if matrix is None:
        matrix = edge_mass(mesh, c)
    return mu * matrix


def scaled_spectrum(matrix: np.ndarray, volume: float, measures: np.ndarray) -> Tuple[float, float]:
    """Eigenvalue range of the form against the moment-scaled L² proxy |P| Σ (dof/measure)²."""

    d = np.sqrt(volume) / measures
    scaled = matrix / np.outer(d, d)
    eig = np.linalg.eigvalsh(0.5 * (scaled + scaled.T))
    return float(eig[0]), float(eig[-1])


@dataclass(frozen=True, eq=False)
class LocalElementOps:
    cell: int
    mu: float
    h: float
    vertices: np.ndarray
    edges: np.ndarray
    faces: np.ndarray
    face_signs: np.ndarray
    edge_projection: CellEdgeProjection
    face_projection: CellFaceProjection
    edge_matrix: np.ndarray
    face_matrix: np.ndarray
    grad_block: np.ndarray
    curl_block: np.ndarray
    edge_spectrum: Tuple[float, float]
    face_spectrum: Tuple[float, float]

    @property
    def weighted_edge_matrix(self) -> np.ndarray:
        return self.mu * self.edge_matrix


def build_local_ops(
    mesh: PolyMesh,
    c: int,
    mu: float,
    face_ops: Optional[Sequence[FaceEdgeProjection]] = None,
) -> LocalElementOps:
    if not mu > 0.0:
        raise NonPositivePermeability(f"cell {c}: permeability must be positive, got {mu}")
    edge_proj = proj_edge_cell(mesh, c, face_ops)
    face_proj = proj_face_cell(mesh, c)
    m_edge = edge_mass(mesh, c, edge_proj)
    m_face = face_mass(mesh, c, face_proj)
    cell = mesh.cells[c]
    edges = edge_proj.edges
    vertices = mesh.cell_vertices[c]
    grad_block = np.zeros((edges.size, vertices.size), dtype=np.int64)
    pairs = mesh.edges[edges]
    grad_block[np.arange(edges.size), np.searchsorted(vertices, pairs[:, 0])] = -1
    grad_block[np.arange(edges.size), np.searchsorted(vertices, pairs[:, 1])] = 1
    curl_block = np.zeros((len(cell), edges.size), dtype=np.int64)
    for i, f in enumerate(cell.index):
        face = mesh.faces[int(f)]
        curl_block[i, np.searchsorted(edges, face.index)] = face.sign
    volume = float(mesh.cell_volumes[c])
    edge_spec = scaled_spectrum(m_edge, volume, mesh.edge_lengths[edges])
    face_spec = scaled_spectrum(m_face, volume, mesh.face_areas[cell.index])
    logger.debug("cell %d spectra: edge %.3e..%.3e face %.3e..%.3e", c, *edge_spec, *face_spec)
    return LocalElementOps(
        cell=c,
        mu=float(mu),
        h=float(mesh.cell_diameters[c]),
        vertices=vertices,
        edges=edges,
        faces=cell.index,
        face_signs=cell.sign,
        edge_projection=edge_proj,
        face_projection=face_proj,
        edge_matrix=m_edge,
        face_matrix=m_face,
        grad_block=grad_block,
        curl_block=curl_block,
        edge_spectrum=edge_spec,
        face_spectrum=face_spec,
    )


__all__ = [
    "edge_mass",
    "face_mass",
    "weighted_edge_mass",
    "scaled_spectrum",
    "LocalElementOps",
    "build_local_ops",
]
