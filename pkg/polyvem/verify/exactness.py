"""Randomized exactness of the projections and consistency of the local forms.

Each sample draws a cell from a pool of perturbed, extruded and prismatic
meshes plus random lowest-order data on it, and records a relative error.
"""

from __future__ import annotations

import logging
from typing import Callable, Dict, List, Sequence

import numpy as np
import pandas as pd

from ..localforms import edge_mass, face_mass
from ..mesh import PolyMesh, parse_mesh_descriptor
from ..projections import proj_edge_cell, proj_edge_face, proj_face_cell, proj_nodal_face
from ..quadrature import cell_rule, edge_rule, face_rule

logger = logging.getLogger(__name__)

SAMPLE_MESHES = ("perturbed:3:0.2:11", "perturbed:3:0.3:12", "hexagon:2", "annulus:1", "annulus-tri:1")
PROJECTION_TOL = 1e-11
CONSISTENCY_TOL = 1e-12


def sample_meshes(descriptors: Sequence[str] = SAMPLE_MESHES) -> List[PolyMesh]:
    return [parse_mesh_descriptor(d) for d in descriptors]


def _relative(got: np.ndarray, expected: np.ndarray) -> float:
    got, expected = np.ravel(got), np.ravel(expected)
    return float(np.abs(got - expected).max() / max(np.abs(expected).max(), 1.0))


def _edge_moments(mesh: PolyMesh, edges: np.ndarray, field: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    out = np.empty(edges.size)
    for k, e in enumerate(edges):
        points, weights = edge_rule(mesh, int(e), 2)
        out[k] = weights @ (field(points) @ mesh.edge_tangents[e])
    return out


def projection_errors(mesh: PolyMesh, c: int, rng: np.random.Generator) -> Dict[str, float]:
    """Relative errors of the four projections on random data reproducible in cell ``c``."""

    faces = mesh.cells[c].index
    f = int(rng.choice(faces))
    a, b, g = rng.normal(size=(3, 3))
    kappa, shift = rng.normal(size=2)

    def rotation(points: np.ndarray) -> np.ndarray:
        return a + np.cross(b, np.atleast_2d(points))

    nodal = proj_nodal_face(mesh, f)
    coeff = nodal.matrix @ (mesh.vertices[nodal.vertices] @ g + shift)
    tau1, tau2 = nodal.frame.tau1, nodal.frame.tau2
    errors = {"nodal_face": _relative(coeff, [g @ tau1, 0.0, 0.0, g @ tau2, 0.0, 0.0])}

    edge_face = proj_edge_face(mesh, f)
    dofs = _edge_moments(mesh, edge_face.edges, rotation)
    points, _ = face_rule(mesh, f, 2)
    n = mesh.face_normals[f]
    exact = rotation(points)
    expected = np.append((exact - np.outer(exact @ n, n)).ravel(), 2.0 * b @ n)
    got = np.append(edge_face.evaluate_3d(points, dofs).ravel(), edge_face.rot @ dofs)
    errors["edge_face"] = _relative(got, expected)

    edge_cell = proj_edge_cell(mesh, c)
    dofs = _edge_moments(mesh, edge_cell.edges, rotation)
    errors["edge_cell"] = _relative(edge_cell.matrix @ dofs, rotation(mesh.cell_barycenters[c])[0])

    face_cell = proj_face_cell(mesh, c)
    own = face_cell.faces
    normal_part = np.einsum("ij,ij->i", a + kappa * mesh.face_barycenters[own], mesh.face_normals[own])
    fluxes = mesh.face_areas[own] * normal_part
    points, _ = cell_rule(mesh, c, 2)
    expected = np.concatenate([(a + kappa * points).ravel(), a + kappa * mesh.cell_barycenters[c], [3.0 * kappa]])
    got = np.concatenate([face_cell.evaluate(points, fluxes).ravel(), face_cell.pi0 @ fluxes, [face_cell.div @ fluxes]])
    errors["face_cell"] = _relative(got, expected)
    return errors


def consistency_errors(mesh: PolyMesh, c: int, rng: np.random.Generator) -> Dict[str, float]:
    """Consistency defects against constants, scaled by the size of the summands, and smallest eigenvalues."""

    volume = mesh.cell_volumes[c]
    p0 = rng.normal(size=3)

    edge_proj = proj_edge_cell(mesh, c)
    m_edge = edge_mass(mesh, c, edge_proj)
    v = rng.normal(size=edge_proj.edges.size)
    w = mesh.edge_vectors[edge_proj.edges] @ p0
    expected = volume * (edge_proj.matrix @ v) @ p0
    scale = np.abs(v) @ np.abs(m_edge) @ np.abs(w) + volume * np.abs(edge_proj.matrix @ v) @ np.abs(p0)

    face_proj = proj_face_cell(mesh, c)
    m_face = face_mass(mesh, c, face_proj)
    s = rng.normal(size=face_proj.faces.size)
    t = mesh.face_areas[face_proj.faces] * (mesh.face_normals[face_proj.faces] @ p0)
    face_expected = volume * (face_proj.pi0 @ s) @ p0
    face_scale = np.abs(s) @ np.abs(m_face) @ np.abs(t) + volume * np.abs(face_proj.pi0 @ s) @ np.abs(p0)

    return {
        "edge_consistency": float(abs(v @ m_edge @ w - expected) / max(scale, 1e-300)),
        "face_consistency": float(abs(s @ m_face @ t - face_expected) / max(face_scale, 1e-300)),
        "edge_min_eig": float(np.linalg.eigvalsh(m_edge)[0]),
        "face_min_eig": float(np.linalg.eigvalsh(m_face)[0]),
    }


def _sample(
    check: Callable[[PolyMesh, int, np.random.Generator], Dict[str, float]],
    meshes: Sequence[PolyMesh],
    samples: int,
    seed: int,
) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(samples):
        m = int(rng.integers(len(meshes)))
        c = int(rng.integers(meshes[m].n_cells))
        rows.append({"mesh": m, "cell": c, **check(meshes[m], c, rng)})
    return pd.DataFrame(rows)


def projection_exactness(meshes: Sequence[PolyMesh], samples: int = 500, seed: int = 0) -> pd.DataFrame:
    table = _sample(projection_errors, meshes, samples, seed)
    logger.info("projection exactness over %d samples: max %.3e", samples, table.drop(columns=["mesh", "cell"]).max().max())
    return table


def local_form_consistency(meshes: Sequence[PolyMesh], samples: int = 200, seed: int = 0) -> pd.DataFrame:
    table = _sample(consistency_errors, meshes, samples, seed)
    logger.info(
        "local form consistency over %d cells: max defect %.3e",
        samples,
        table[["edge_consistency", "face_consistency"]].max().max(),
    )
    return table


__all__ = [
    "SAMPLE_MESHES",
    "PROJECTION_TOL",
    "CONSISTENCY_TOL",
    "sample_meshes",
    "projection_errors",
    "consistency_errors",
    "projection_exactness",
    "local_form_consistency",
]
