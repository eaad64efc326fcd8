"""
projections.py — обчислювані L²-проєкції з DOF на поліноми (грань і комірка)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Type

import numpy as np

from .config import VEMConfig
from .errors import DegenerateCell, DegenerateFace, GeometryError
from .mesh.core import PolyMesh
from .quadrature import MonomialBasis, cell_basis, cell_moments, check_planar, face_rule, gauss_segment

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FaceFrame:
    """Orthonormal in-plane axes with τ1 × τ2 = n_f, origin at the face barycenter."""

    origin: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    normal: np.ndarray

    @classmethod
    def of(cls, mesh: PolyMesh, f: int) -> "FaceFrame":
        normal = mesh.face_normals[f]
        loop = mesh.face_loops[f]
        direction = mesh.vertices[loop[1]] - mesh.vertices[loop[0]]
        tau1 = direction - (direction @ normal) * normal
        norm = np.linalg.norm(tau1)
        if norm == 0.0 or not np.isfinite(norm):
            raise DegenerateFace(f"face {f}: first edge is parallel to the normal")
        tau1 = tau1 / norm
        return cls(origin=mesh.face_barycenters[f], tau1=tau1, tau2=np.cross(normal, tau1), normal=normal)

    def to_local(self, points: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(points) - self.origin
        return np.column_stack([rel @ self.tau1, rel @ self.tau2])

    def to_global(self, vectors2d: np.ndarray) -> np.ndarray:
        v = np.atleast_2d(vectors2d)
        return v[:, 0:1] * self.tau1 + v[:, 1:2] * self.tau2


@dataclass(frozen=True, eq=False)
class LocalProjection:
    """``matrix`` maps the local DOF vector to coefficients over ``basis`` (component-major)."""

    matrix: np.ndarray
    basis: MonomialBasis


def _solve_gram(gram: np.ndarray, rhs: np.ndarray, error: Type[GeometryError], label: str) -> np.ndarray:
    cond = float(np.linalg.cond(gram))
    logger.debug("%s: Gram condition number %.3e", label, cond)
    if not np.isfinite(cond) or cond > VEMConfig.GRAM_COND_MAX:
        logger.warning("%s rejected: Gram condition number %.3e", label, cond)
        raise error(f"{label}: Gram condition number {cond:.3e} exceeds {VEMConfig.GRAM_COND_MAX:.1e}")
    return np.linalg.solve(gram, rhs)


@dataclass(frozen=True, eq=False)
class _FaceLoopGeometry:
    points: np.ndarray      # loop vertices in frame coordinates (m, 2)
    lengths: np.ndarray     # (m,)
    normals: np.ndarray     # outward in-plane normals (m, 2)
    heights: np.ndarray     # x_f · ν on each edge (m,)


def _loop_geometry(mesh: PolyMesh, f: int, frame: FaceFrame) -> _FaceLoopGeometry:
    pts = frame.to_local(mesh.vertices[mesh.face_loops[f]])
    d = np.roll(pts, -1, axis=0) - pts
    lengths = np.linalg.norm(d, axis=1)
    if np.any(lengths <= 0.0):
        raise DegenerateFace(f"face {f} has a zero-length edge")
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]
    return _FaceLoopGeometry(pts, lengths, normals, np.einsum("ij,ij->i", pts, normals))


def _face_setup(mesh: PolyMesh, f: int):
    if mesh.face_areas[f] <= 0.0:
        raise DegenerateFace(f"face {f} has zero area")
    check_planar(mesh, f)
    frame = FaceFrame.of(mesh, f)
    basis = MonomialBasis(center=np.zeros(2), h=float(mesh.face_diameters[f]), degree=1)
    qp, qw = face_rule(mesh, f, 2)
    local_q = frame.to_local(qp)
    vals = basis.evaluate(local_q)
    mass = vals.T @ (qw[:, None] * vals)
    return frame, basis, local_q, qw, mass, _loop_geometry(mesh, f, frame)


def face_mean_from_vertices(mesh: PolyMesh, f: int) -> np.ndarray:
    """Row r with r·q = (1/|f|) ∫_f q, from 2∫_f q = ∫_{∂f} q x_f·ν (vertices in loop order)."""

    frame = FaceFrame.of(mesh, f)
    geo = _loop_geometry(mesh, f, frame)
    edge_term = 0.25 * geo.heights * geo.lengths
    return (edge_term + np.roll(edge_term, 1)) / mesh.face_areas[f]


@dataclass(frozen=True, eq=False)
class FaceNodalProjection(LocalProjection):
    frame: FaceFrame
    vertices: np.ndarray


def proj_nodal_face(mesh: PolyMesh, f: int) -> FaceNodalProjection:
    """Π₁∇q ∈ (P₁(f))² from vertex values (columns follow the face loop)."""

    frame, basis, _, _, mass, geo = _face_setup(mesh, f)
    m = geo.points.shape[0]
    h = basis.h
    gram = np.kron(np.eye(2), mass)
    rhs = np.zeros((6, m))
    mean = face_mean_from_vertices(mesh, f) * mesh.face_areas[f]
    # div(e_c m_a) is 1/h for (c, a) in {(0, ξ), (1, η)}
    rhs[0 * 3 + 1] -= mean / h
    rhs[1 * 3 + 2] -= mean / h
    s, w = gauss_segment(2)
    nxt = np.roll(np.arange(m), -1)
    for k in range(m):
        pts = geo.points[k] + s[:, None] * (geo.points[nxt[k]] - geo.points[k])
        vals = basis.evaluate(pts)
        for c in range(2):
            edge_w = geo.lengths[k] * w * geo.normals[k, c]
            rhs[c * 3 : c * 3 + 3, k] += vals.T @ (edge_w * (1.0 - s))
            rhs[c * 3 : c * 3 + 3, nxt[k]] += vals.T @ (edge_w * s)
    matrix = _solve_gram(gram, rhs, DegenerateFace, f"face {f} nodal projection")
    return FaceNodalProjection(matrix=matrix, basis=basis, frame=frame, vertices=mesh.face_loops[f])


def _rot_potential(h: float) -> np.ndarray:
    """p₂ for every basis field e_c m_a, over unscaled monomials [x, y, x², xy, y²].

    p₁ = (a0 + a1 x + a2 y, b0 + b1 x + b2 y) splits as rot p₂ + x p₀ with
    p₀ = (a1 + b2)/2 and p₂ = a0 y + (a1 - b2)/2 xy + a2 y²/2 - b0 x - b1 x²/2.
    """

    out = np.zeros((6, 5))
    for j in range(6):
        a = np.zeros(3)
        b = np.zeros(3)
        c, idx = divmod(j, 3)
        scale = 1.0 if idx == 0 else 1.0 / h
        (a if c == 0 else b)[idx] = scale
        out[j] = [-b[0], a[0], -0.5 * b[1], 0.5 * (a[1] - b[2]), 0.5 * a[2]]
    return out


def _quadratic_values(pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    return np.column_stack([x, y, x * x, x * y, y * y])


@dataclass(frozen=True, eq=False)
class FaceEdgeProjection(LocalProjection):
    """Π₁ of a tangential field on a face plus its scalar rot; columns follow the face's edges."""

    frame: FaceFrame
    edges: np.ndarray
    signs: np.ndarray
    rot: np.ndarray

    @property
    def matrix_3d(self) -> np.ndarray:
        """(monomial, xyz component, dof) tensor of Π₁v^τ expressed in 3-D."""

        coeff = self.matrix.reshape(2, 3, -1)
        return (
            coeff[0][:, None, :] * self.frame.tau1[None, :, None]
            + coeff[1][:, None, :] * self.frame.tau2[None, :, None]
        )

    def evaluate_3d(self, points: np.ndarray, dofs: np.ndarray) -> np.ndarray:
        vals = self.basis.evaluate(self.frame.to_local(points))
        return np.einsum("ga,acm,m->gc", vals, self.matrix_3d, np.asarray(dofs, dtype=float))


def proj_edge_face(mesh: PolyMesh, f: int) -> FaceEdgeProjection:
    """Π₁v ∈ (P₁(f))² and rot_f v from the edge moments of ∂f (global edge orientation)."""

    frame, basis, local_q, qw, mass, geo = _face_setup(mesh, f)
    face = mesh.faces[f]
    m = len(face)
    area = float(mesh.face_areas[f])
    sigma = face.sign.astype(float)
    potentials = _rot_potential(basis.h)
    face_int = potentials @ (qw @ _quadratic_values(local_q))
    s, w = gauss_segment(2)
    nxt = np.roll(np.arange(m), -1)
    rhs = np.zeros((6, m))
    for k in range(m):
        pts = geo.points[k] + s[:, None] * (geo.points[nxt[k]] - geo.points[k])
        edge_mean = potentials @ (w @ _quadratic_values(pts))
        # ∫_f v·rot p₂ = rot v ∫_f p₂ - ∮ v·t p₂, with v·t = σ dof / |e| and rot v = Σ σ dof / |f|
        rhs[:, k] = sigma[k] * (face_int / area - edge_mean)
    matrix = _solve_gram(np.kron(np.eye(2), mass), rhs, DegenerateFace, f"face {f} edge projection")
    return FaceEdgeProjection(
        matrix=matrix, basis=basis, frame=frame, edges=face.index, signs=face.sign, rot=sigma / area
    )


def face_edge_projections(mesh: PolyMesh, faces: Optional[Sequence[int]] = None) -> list:
    faces = range(mesh.n_faces) if faces is None else faces
    return [proj_edge_face(mesh, int(f)) for f in faces]


@dataclass(frozen=True, eq=False)
class CellEdgeProjection:
    """Π₀v ∈ (P₀(P))³; ``matrix`` is (3, local edges) over ``edges`` (sorted global ids)."""

    matrix: np.ndarray
    edges: np.ndarray


def proj_edge_cell(
    mesh: PolyMesh, c: int, face_ops: Optional[Sequence[FaceEdgeProjection]] = None
) -> CellEdgeProjection:
    """Π₀v from face traces: ∫_P v·k = Σ_f ∫_f (n ∧ w_k)·Π₁v^τ with w_k = ½ k ∧ x_P."""

    volume = float(mesh.cell_volumes[c])
    if volume <= 0.0:
        raise DegenerateCell(f"cell {c} has non-positive volume {volume:.3e}")
    cell = mesh.cells[c]
    edges = mesh.cell_edges[c]
    center = mesh.cell_barycenters[c]
    matrix = np.zeros((3, edges.size))
    for f, s in zip(cell.index, cell.sign):
        f = int(f)
        op = face_ops[f] if face_ops is not None else proj_edge_face(mesh, f)
        cols = np.searchsorted(edges, op.edges)
        qp, qw = face_rule(mesh, f, 2)
        normal = s * mesh.face_normals[f]
        x = qp - center
        # (n ∧ (½ k ∧ x))_c = ½ (k_c (n·x) - x_c (n·k))
        nw = 0.5 * (
            np.einsum("g,kc->gkc", x @ normal, np.eye(3)) - np.einsum("gc,k->gkc", x, normal)
        )
        vals = op.basis.evaluate(op.frame.to_local(qp))
        trace = np.einsum("ga,acm->gcm", vals, op.matrix_3d)
        matrix[:, cols] += np.einsum("g,gkc,gcm->km", qw, nw, trace)
    return CellEdgeProjection(matrix=matrix / volume, edges=edges)


@dataclass(frozen=True, eq=False)
class CellFaceProjection(LocalProjection):
    """Π₁ψ (12 coefficients), its constant part Π₀ψ and div ψ; columns follow the cell's faces."""

    faces: np.ndarray
    signs: np.ndarray
    pi0: np.ndarray
    div: np.ndarray

    def evaluate(self, points: np.ndarray, dofs: np.ndarray) -> np.ndarray:
        coeff = (self.matrix @ np.asarray(dofs, dtype=float)).reshape(3, -1)
        return self.basis.evaluate(points) @ coeff.T


def proj_face_cell(mesh: PolyMesh, c: int) -> CellFaceProjection:
    """Π₁ψ via ∫_P ψ·∇p₂ = -∫_P div ψ p₂ + Σ_f ψ·n ∫_f p₂ (the x ∧ p₀ moments vanish)."""

    volume = float(mesh.cell_volumes[c])
    if volume <= 0.0:
        raise DegenerateCell(f"cell {c} has non-positive volume {volume:.3e}")
    cell = mesh.cells[c]
    center = mesh.cell_barycenters[c]
    basis2 = cell_basis(mesh, c, degree=2)
    h = basis2.h
    moments = cell_moments(mesh, c, basis2)
    lookup = {e: i for i, e in enumerate(basis2.exponents)}
    lin = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    mass = np.array(
        [[moments[lookup[tuple(np.add(a, b))]] for b in lin] for a in lin]
    )
    gram = np.kron(np.eye(3), mass)

    nf = len(cell)
    rhs = np.zeros((12, nf))
    for i, (f, s) in enumerate(zip(cell.index, cell.sign)):
        f = int(f)
        qp, qw = face_rule(mesh, f, 2)
        x = qp - center
        area = float(mesh.face_areas[f])
        for comp in range(3):
            e_c = [0, 0, 0]
            e_c[comp] = 1
            # constant basis field: p₂ = x_c, ∫_P x_c = 0
            rhs[comp * 4, i] = s * (qw @ x[:, comp]) / area
            for d in range(3):
                e_d = [0, 0, 0]
                e_d[d] = 1
                vol_int = 0.5 * h * moments[lookup[tuple(np.add(e_c, e_d))]]
                face_int = (qw @ (x[:, comp] * x[:, d])) / (2.0 * h)
                rhs[comp * 4 + 1 + d, i] = s * (-vol_int / volume + face_int / area)
    matrix = _solve_gram(gram, rhs, DegenerateCell, f"cell {c} face projection")
    rel = mesh.face_barycenters[cell.index] - center
    pi0 = (cell.sign[:, None] * rel).T / volume
    div = cell.sign.astype(float) / volume
    return CellFaceProjection(
        matrix=matrix,
        basis=cell_basis(mesh, c, degree=1),
        faces=cell.index,
        signs=cell.sign,
        pi0=pi0,
        div=div,
    )


__all__ = [
    "FaceFrame",
    "LocalProjection",
    "FaceNodalProjection",
    "FaceEdgeProjection",
    "CellEdgeProjection",
    "CellFaceProjection",
    "face_mean_from_vertices",
    "proj_nodal_face",
    "proj_edge_face",
    "proj_edge_cell",
    "proj_face_cell",
    "face_edge_projections",
]
