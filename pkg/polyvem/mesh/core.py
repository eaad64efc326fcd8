"""Oriented polyhedral complex with the geometric quantities the lowest-order spaces need."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SignedIndex:
    """Ordered entity references with a ±1 orientation sign each."""

    index: np.ndarray
    sign: np.ndarray

    def __post_init__(self) -> None:
        index = np.asarray(self.index, dtype=np.int64)
        sign = np.asarray(self.sign, dtype=np.int64)
        if index.shape != sign.shape or index.ndim != 1:
            raise ValueError("index and sign must be 1-D arrays of equal length")
        index.setflags(write=False)
        sign.setflags(write=False)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "sign", sign)

    def __len__(self) -> int:
        return int(self.index.size)


@dataclass(frozen=True, eq=False)
class FaceGeometry:
    area: float
    normal: np.ndarray
    barycenter: np.ndarray
    diameter: float


@dataclass(frozen=True, eq=False)
class CellGeometry:
    volume: float
    barycenter: np.ndarray
    diameter: float
    faces: np.ndarray
    face_signs: np.ndarray
    face_areas: np.ndarray
    face_normals: np.ndarray
    face_barycenters: np.ndarray
    face_diameters: np.ndarray
    edges: np.ndarray
    edge_lengths: np.ndarray
    edge_tangents: np.ndarray

    def to_dict(self) -> Dict[str, object]:
        return {
            "volume": self.volume,
            "barycenter": self.barycenter.tolist(),
            "diameter": self.diameter,
            "n_faces": int(self.faces.size),
            "n_edges": int(self.edges.size),
        }


@dataclass(frozen=True, eq=False)
class PolyMesh:
    """Immutable vertex/edge/face/cell complex.

    ``edges[e] = (tail, head)`` fixes the tangent t_e. Each face is a loop of
    signed edges (+1 when the edge direction follows the loop, which runs
    counterclockwise about n_f). Each cell is a set of signed faces (+1 when
    n_f points out of the cell).
    """

    vertices: np.ndarray
    edges: np.ndarray
    faces: Tuple[SignedIndex, ...]
    cells: Tuple[SignedIndex, ...]
    boundary_face: np.ndarray
    subdomain: np.ndarray
    subdomain_names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=float).reshape(-1, 3)
        edges = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        boundary = np.array(self.boundary_face, dtype=bool).reshape(-1)
        subdomain = np.array(self.subdomain, dtype=np.int64).reshape(-1)
        for arr in (vertices, edges, boundary, subdomain):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "boundary_face", boundary)
        object.__setattr__(self, "subdomain", subdomain)
        object.__setattr__(self, "faces", tuple(self.faces))
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "subdomain_names", dict(self.subdomain_names))
        if boundary.size != len(self.faces):
            raise ValueError("boundary_face must have one flag per face")
        if subdomain.size != len(self.cells):
            raise ValueError("subdomain must have one label per cell")

    # -- counts -----------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def summary(self) -> Dict[str, int]:
        return {
            "vertices": self.n_vertices,
            "edges": self.n_edges,
            "faces": self.n_faces,
            "cells": self.n_cells,
        }

    # -- topology ---------------------------------------------------------
    @cached_property
    def face_loops(self) -> Tuple[np.ndarray, ...]:
        """Vertex loop of every face: the start vertex of each signed edge."""

        loops = []
        for face in self.faces:
            pairs = self.edges[face.index]
            loops.append(np.where(face.sign > 0, pairs[:, 0], pairs[:, 1]))
        return tuple(loops)

    @cached_property
    def face_cells(self) -> Tuple[List[Tuple[int, int]], ...]:
        refs: List[List[Tuple[int, int]]] = [[] for _ in range(self.n_faces)]
        for c, cell in enumerate(self.cells):
            for f, s in zip(cell.index, cell.sign):
                refs[int(f)].append((c, int(s)))
        return tuple(refs)

    @cached_property
    def face_owner(self) -> np.ndarray:
        owner = np.full(self.n_faces, -1, dtype=np.int64)
        for f, refs in enumerate(self.face_cells):
            if refs:
                owner[f] = refs[0][0]
        return owner

    @cached_property
    def cell_edges(self) -> Tuple[np.ndarray, ...]:
        return tuple(
            np.unique(np.concatenate([self.faces[int(f)].index for f in cell.index]))
            for cell in self.cells
        )

    @cached_property
    def cell_vertices(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.unique(self.edges[edges].reshape(-1)) for edges in self.cell_edges)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        mask = np.zeros(self.n_edges, dtype=bool)
        for f in np.flatnonzero(self.boundary_face):
            mask[self.faces[int(f)].index] = True
        return mask

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edges].reshape(-1)] = True
        return mask

    # -- edge geometry ----------------------------------------------------
    @cached_property
    def edge_vectors(self) -> np.ndarray:
        return self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors, axis=1)

    @cached_property
    def edge_tangents(self) -> np.ndarray:
        lengths = np.where(self.edge_lengths > 0.0, self.edge_lengths, 1.0)
        return self.edge_vectors / lengths[:, None]

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    # -- face geometry ----------------------------------------------------
    @cached_property
    def _face_geometry(self) -> Tuple[np.ndarray, ...]:
        areas = np.zeros(self.n_faces)
        normals = np.zeros((self.n_faces, 3))
        centers = np.zeros((self.n_faces, 3))
        diameters = np.zeros(self.n_faces)
        planarity = np.zeros(self.n_faces)
        for f, loop in enumerate(self.face_loops):
            pts = self.vertices[loop]
            nxt = np.roll(pts, -1, axis=0)
            anchor = pts.mean(axis=0)
            # Newell vector area
            vec = 0.5 * np.cross(pts - anchor, nxt - anchor).sum(axis=0)
            area = float(np.linalg.norm(vec))
            normal = vec / area if area > 0.0 else np.zeros(3)
            tri = 0.5 * np.cross(pts - anchor, nxt - anchor) @ normal
            total = tri.sum()
            if abs(total) > 0.0:
                center = (tri[:, None] * (anchor + pts + nxt) / 3.0).sum(axis=0) / total
            else:
                center = anchor
            diff = pts[:, None, :] - pts[None, :, :]
            diameters[f] = float(np.sqrt((diff ** 2).sum(axis=2).max()))
            centered = pts - pts.mean(axis=0)
            _, _, vt = np.linalg.svd(centered, full_matrices=True)
            planarity[f] = float(np.abs(centered @ vt[-1]).max())
            areas[f], normals[f], centers[f] = area, normal, center
        return areas, normals, centers, diameters, planarity

    @property
    def face_areas(self) -> np.ndarray:
        return self._face_geometry[0]

    @property
    def face_normals(self) -> np.ndarray:
        return self._face_geometry[1]

    @property
    def face_barycenters(self) -> np.ndarray:
        return self._face_geometry[2]

    @property
    def face_diameters(self) -> np.ndarray:
        return self._face_geometry[3]

    @property
    def face_planarity(self) -> np.ndarray:
        """Largest vertex distance to the best-fit plane (length units)."""

        return self._face_geometry[4]

    def face_geometry(self, f: int) -> FaceGeometry:
        return FaceGeometry(
            area=float(self.face_areas[f]),
            normal=self.face_normals[f],
            barycenter=self.face_barycenters[f],
            diameter=float(self.face_diameters[f]),
        )

    # -- cell geometry ----------------------------------------------------
    @cached_property
    def _cell_geometry(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        volumes = np.zeros(self.n_cells)
        centers = np.zeros((self.n_cells, 3))
        diameters = np.zeros(self.n_cells)
        for c, cell in enumerate(self.cells):
            verts = self.vertices[self.cell_vertices[c]]
            anchor = verts.mean(axis=0)
            rel = self.face_barycenters[cell.index] - anchor
            height = cell.sign * np.einsum("ij,ij->i", rel, self.face_normals[cell.index])
            weight = height * self.face_areas[cell.index]
            volume = weight.sum() / 3.0
            volumes[c] = volume
            if volume != 0.0:
                centers[c] = anchor + (weight[:, None] * rel).sum(axis=0) / (4.0 * volume)
            else:
                centers[c] = anchor
            diff = verts[:, None, :] - verts[None, :, :]
            diameters[c] = float(np.sqrt((diff ** 2).sum(axis=2).max()))
        return volumes, centers, diameters

    @property
    def cell_volumes(self) -> np.ndarray:
        return self._cell_geometry[0]

    @property
    def cell_barycenters(self) -> np.ndarray:
        return self._cell_geometry[1]

    @property
    def cell_diameters(self) -> np.ndarray:
        return self._cell_geometry[2]

    @property
    def mesh_size(self) -> float:
        """Mean cell diameter."""

        return float(self.cell_diameters.mean())

    def cell_geometry(self, c: int) -> CellGeometry:
        cell = self.cells[c]
        edges = self.cell_edges[c]
        return CellGeometry(
            volume=float(self.cell_volumes[c]),
            barycenter=self.cell_barycenters[c],
            diameter=float(self.cell_diameters[c]),
            faces=cell.index,
            face_signs=cell.sign,
            face_areas=self.face_areas[cell.index],
            face_normals=self.face_normals[cell.index],
            face_barycenters=self.face_barycenters[cell.index],
            face_diameters=self.face_diameters[cell.index],
            edges=edges,
            edge_lengths=self.edge_lengths[edges],
            edge_tangents=self.edge_tangents[edges],
        )

    def cells_in(self, subdomain: int) -> np.ndarray:
        return np.flatnonzero(self.subdomain == subdomain)


def _loop_direction(stored: Sequence[int], loop: Sequence[int]) -> int:
    """+1 when ``loop`` runs the same cyclic way as ``stored``, -1 when reversed."""

    m = len(stored)
    pos = list(stored).index(loop[0])
    if stored[(pos + 1) % m] == loop[1]:
        return 1
    if stored[(pos - 1) % m] == loop[1]:
        return -1
    return 0


def from_cell_loops(
    vertices: np.ndarray,
    cells: Iterable[Sequence[Sequence[int]]],
    subdomain: Optional[Sequence[int]] = None,
    subdomain_names: Optional[Mapping[int, str]] = None,
) -> PolyMesh:
    """Build a :class:`PolyMesh` from cells given as outward-oriented vertex loops.

    Edges get tail < head. A face takes the orientation of the first cell that
    lists it; a second cell listing the loop the same way round receives sign
    +1 twice, which :func:`polyvem.mesh.validate` reports.
    """

    edge_index: Dict[Tuple[int, int], int] = {}
    edges: List[Tuple[int, int]] = []
    face_index: Dict[Tuple[int, ...], int] = {}
    face_loops: List[Tuple[int, ...]] = []
    face_refs: List[int] = []
    cell_refs: List[SignedIndex] = []

    def edge_of(a: int, b: int) -> Tuple[int, int]:
        key = (a, b) if a < b else (b, a)
        idx = edge_index.get(key)
        if idx is None:
            idx = len(edges)
            edge_index[key] = idx
            edges.append(key)
        return idx, (1 if a < b else -1)

    cell_list = [[tuple(int(v) for v in loop) for loop in cell] for cell in cells]
    for cell in cell_list:
        f_idx, f_sign = [], []
        for loop in cell:
            key = tuple(sorted(loop))
            idx = face_index.get(key)
            if idx is None:
                idx = len(face_loops)
                face_index[key] = idx
                face_loops.append(loop)
                face_refs.append(0)
                sign = 1
            else:
                sign = -1 if _loop_direction(face_loops[idx], loop) == -1 else 1
            face_refs[idx] += 1
            f_idx.append(idx)
            f_sign.append(sign)
        cell_refs.append(SignedIndex(f_idx, f_sign))

    faces: List[SignedIndex] = []
    for loop in face_loops:
        e_idx, e_sign = [], []
        for a, b in zip(loop, loop[1:] + loop[:1]):
            idx, sign = edge_of(a, b)
            e_idx.append(idx)
            e_sign.append(sign)
        faces.append(SignedIndex(e_idx, e_sign))

    if subdomain is None:
        subdomain = np.zeros(len(cell_refs), dtype=np.int64)
    mesh = PolyMesh(
        vertices=np.asarray(vertices, dtype=float),
        edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        faces=tuple(faces),
        cells=tuple(cell_refs),
        boundary_face=np.asarray(face_refs) == 1,
        subdomain=np.asarray(subdomain, dtype=np.int64),
        subdomain_names=subdomain_names or {},
    )
    logger.debug("built mesh %s", mesh.summary())
    return mesh
