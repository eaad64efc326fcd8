"""
quadrature.py — інтегрування поліномів по ребрах, гранях і комірках
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from .config import VEMConfig
from .errors import NonPlanarFace
from .mesh.core import PolyMesh

PointFunction = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def gauss_segment(n_points: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss–Legendre nodes on [0, 1] with weights summing to 1."""

    x, w = leggauss(n_points)
    return 0.5 * (x + 1.0), 0.5 * w


def _points_for_degree(degree: int) -> int:
    return max(1, math.ceil((degree + 1) / 2))


@lru_cache(maxsize=None)
def _jacobi01(n_points: int, alpha: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_jacobi(n_points, alpha, 0)
    return 0.5 * (x + 1.0), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss–Jacobi rule: barycentric points (n, 3), weights summing to 1."""

    n = _points_for_degree(degree)
    u, wu = _jacobi01(n, 1)
    v, wv = gauss_segment(n)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    s = uu.ravel()
    t = ((1.0 - uu) * vv).ravel()
    weights = np.outer(wu, wv).ravel() * 2.0
    bary = np.column_stack([1.0 - s - t, s, t])
    return bary, weights


@lru_cache(maxsize=None)
def tetrahedron_rule(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss–Jacobi rule on the tetrahedron, weights summing to 1."""

    n = _points_for_degree(degree)
    u, wu = _jacobi01(n, 2)
    v, wv = _jacobi01(n, 1)
    w, ww = gauss_segment(n)
    uu, vv, ww_ = np.meshgrid(u, v, w, indexing="ij")
    s = uu.ravel()
    t = ((1.0 - uu) * vv).ravel()
    r = ((1.0 - uu) * (1.0 - vv) * ww_).ravel()
    weights = np.einsum("i,j,k->ijk", wu, wv, ww).ravel() * 6.0
    bary = np.column_stack([1.0 - s - t - r, s, t, r])
    return bary, weights


def check_planar(mesh: PolyMesh, f: int, tol: Optional[float] = None) -> None:
    tol = VEMConfig.PLANARITY_TOL if tol is None else tol
    residual = float(mesh.face_planarity[f])
    if residual > tol * float(mesh.face_diameters[f]):
        raise NonPlanarFace(f"face {f} deviates {residual:.3e} from its best-fit plane")


def face_rule(mesh: PolyMesh, f: int, degree: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """Points and absolute weights on face ``f`` (fan from the barycenter)."""

    bary, ref_w = triangle_rule(degree)
    pts = mesh.vertices[mesh.face_loops[f]]
    nxt = np.roll(pts, -1, axis=0)
    center = mesh.face_barycenters[f]
    signed_area = 0.5 * np.cross(pts - center, nxt - center) @ mesh.face_normals[f]
    points = (
        bary[None, :, 0:1] * center
        + bary[None, :, 1:2] * pts[:, None, :]
        + bary[None, :, 2:3] * nxt[:, None, :]
    )
    weights = signed_area[:, None] * ref_w[None, :]
    return points.reshape(-1, 3), weights.reshape(-1)


def cell_rule(mesh: PolyMesh, c: int, degree: int = 6) -> Tuple[np.ndarray, np.ndarray]:
    """Signed-tetrahedra rule over cell ``c``: tets (b_P, b_f, v_i, v_i+1)."""

    bary, ref_w = tetrahedron_rule(degree)
    cell = mesh.cells[c]
    center = mesh.cell_barycenters[c]
    all_points, all_weights = [], []
    for f, s in zip(cell.index, cell.sign):
        pts = mesh.vertices[mesh.face_loops[int(f)]]
        nxt = np.roll(pts, -1, axis=0)
        fc = mesh.face_barycenters[int(f)]
        vol = s * np.einsum("j,ij->i", fc - center, np.cross(pts - center, nxt - center)) / 6.0
        points = (
            bary[None, :, 0:1] * center
            + bary[None, :, 1:2] * fc
            + bary[None, :, 2:3] * pts[:, None, :]
            + bary[None, :, 3:4] * nxt[:, None, :]
        )
        all_points.append(points.reshape(-1, 3))
        all_weights.append((vol[:, None] * ref_w[None, :]).reshape(-1))
    return np.concatenate(all_points), np.concatenate(all_weights)


def edge_rule(mesh: PolyMesh, e: int, n_points: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    s, w = gauss_segment(n_points)
    tail, head = mesh.vertices[mesh.edges[e]]
    return tail + s[:, None] * (head - tail), w * float(mesh.edge_lengths[e])


@dataclass(frozen=True, eq=False)
class MonomialBasis:
    """Scaled monomials ((x - center)/h)^a of total degree <= ``degree``."""

    center: np.ndarray
    h: float
    degree: int = 2

    @property
    def dim(self) -> int:
        return int(np.asarray(self.center).size)

    @property
    def exponents(self) -> Tuple[Tuple[int, ...], ...]:
        return _exponents(self.dim, self.degree)

    def __len__(self) -> int:
        return len(self.exponents)

    def scaled(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - np.asarray(self.center)) / self.h

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values of every basis monomial at ``points``: shape (n_points, len(self))."""

        xi = self.scaled(points)
        exps = np.asarray(self.exponents)
        return np.prod(xi[:, None, :] ** exps[None, :, :], axis=2)

    def degrees(self) -> np.ndarray:
        return np.asarray([sum(e) for e in self.exponents])


@lru_cache(maxsize=None)
def _exponents(dim: int, degree: int) -> Tuple[Tuple[int, ...], ...]:
    out = []
    for total in range(degree + 1):
        if dim == 2:
            out.extend((total - j, j) for j in range(total + 1))
        else:
            for i in range(total, -1, -1):
                for j in range(total - i, -1, -1):
                    out.append((i, j, total - i - j))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Coefficients over a :class:`MonomialBasis`; vector-valued when ``coeffs`` is 2-D."""

    basis: MonomialBasis
    coeffs: np.ndarray

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.basis.evaluate(points) @ np.asarray(self.coeffs)


def integrate_edge(mesh: PolyMesh, e: int, func: PointFunction, n_points: int = 2):
    points, weights = edge_rule(mesh, e, n_points)
    return np.tensordot(weights, func(points), axes=(0, 0))


def integrate_face(mesh: PolyMesh, f: int, func: PointFunction, degree: int = 2, check: bool = True):
    if check:
        check_planar(mesh, f)
    points, weights = face_rule(mesh, f, degree)
    return np.tensordot(weights, func(points), axes=(0, 0))


def cell_moments(mesh: PolyMesh, c: int, basis: MonomialBasis) -> np.ndarray:
    """∫_P m for every monomial m of a 3-D basis, reduced to face integrals.

    A monomial homogeneous of degree d in (x - center) satisfies
    div((x - center) m) = (3 + d) m, and (x - center)·n is constant on each
    planar face.
    """

    cell = mesh.cells[c]
    degrees = basis.degrees()
    total = np.zeros(len(basis))
    for f, s in zip(cell.index, cell.sign):
        f = int(f)
        height = s * float((mesh.face_barycenters[f] - basis.center) @ mesh.face_normals[f])
        points, weights = face_rule(mesh, f, basis.degree)
        total += height * (weights @ basis.evaluate(points))
    return total / (3.0 + degrees)


def integrate_cell(mesh: PolyMesh, c: int, poly: Polynomial):
    moments = cell_moments(mesh, c, poly.basis)
    return np.tensordot(moments, np.asarray(poly.coeffs), axes=(0, 0))


def integrate_cell_sampled(mesh: PolyMesh, c: int, func: PointFunction, degree: int = 6):
    points, weights = cell_rule(mesh, c, degree)
    return np.tensordot(weights, func(points), axes=(0, 0))


def cell_basis(mesh: PolyMesh, c: int, degree: int = 2) -> MonomialBasis:
    return MonomialBasis(center=mesh.cell_barycenters[c], h=float(mesh.cell_diameters[c]), degree=degree)


__all__ = [
    "MonomialBasis",
    "Polynomial",
    "gauss_segment",
    "triangle_rule",
    "tetrahedron_rule",
    "face_rule",
    "cell_rule",
    "edge_rule",
    "check_planar",
    "integrate_edge",
    "integrate_face",
    "integrate_cell",
    "integrate_cell_sampled",
    "cell_moments",
    "cell_basis",
]
