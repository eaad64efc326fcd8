"""Global DOF layouts and the integer incidence operators grad → curl → div."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .config import VEMConfig
from .mesh.core import PolyMesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DofLayout:
    """Vertex, edge and face DOF counts in that global order, plus boundary masks."""

    n_vertex: int
    n_edge: int
    n_face: int
    boundary_vertex: np.ndarray
    boundary_edge: np.ndarray
    boundary_face: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: PolyMesh) -> "DofLayout":
        return cls(
            n_vertex=mesh.n_vertices,
            n_edge=mesh.n_edges,
            n_face=mesh.n_faces,
            boundary_vertex=mesh.boundary_vertices,
            boundary_edge=mesh.boundary_edges,
            boundary_face=mesh.boundary_face,
        )

    @property
    def offsets(self) -> Dict[str, int]:
        return {"vertex": 0, "edge": self.n_vertex, "face": self.n_vertex + self.n_edge}

    @property
    def total(self) -> int:
        return self.n_vertex + self.n_edge + self.n_face

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_edge)

    @property
    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_vertex)


class _Field:
    kind = "field"
    units = ""

    def __init__(self, values: np.ndarray, layout: Optional[DofLayout] = None) -> None:
        values = np.asarray(values, dtype=float).reshape(-1)
        if layout is not None and values.size != self._expected(layout):
            raise ValueError(f"{self.kind} field has {values.size} values, layout expects {self._expected(layout)}")
        self.values = values

    @staticmethod
    def _expected(layout: DofLayout) -> int:
        raise NotImplementedError

    def __len__(self) -> int:
        return int(self.values.size)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0


class VertexField(_Field):
    kind = "vertex"
    units = "field value"

    @staticmethod
    def _expected(layout: DofLayout) -> int:
        return layout.n_vertex


class EdgeField(_Field):
    """Edge moments ∫_e v·t_e."""

    kind = "edge"
    units = "field * length"

    @staticmethod
    def _expected(layout: DofLayout) -> int:
        return layout.n_edge


class FaceField(_Field):
    """Face fluxes ∫_f ψ·n_f."""

    kind = "face"
    units = "field * area"

    @staticmethod
    def _expected(layout: DofLayout) -> int:
        return layout.n_face


def grad_op(mesh: PolyMesh) -> sp.csr_matrix:
    """(G q)_e = q(head) - q(tail)."""

    ne = mesh.n_edges
    rows = np.repeat(np.arange(ne), 2)
    cols = mesh.edges.reshape(-1)
    data = np.tile(np.array([-1, 1], dtype=np.int64), ne)
    return sp.csr_matrix((data, (rows, cols)), shape=(ne, mesh.n_vertices))


def curl_op(mesh: PolyMesh) -> sp.csr_matrix:
    """(C v)_f = signed circulation of edge moments around f."""

    rows = np.concatenate([np.full(len(face), f) for f, face in enumerate(mesh.faces)]) if mesh.faces else []
    cols = np.concatenate([face.index for face in mesh.faces]) if mesh.faces else []
    data = np.concatenate([face.sign for face in mesh.faces]) if mesh.faces else []
    return sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_faces, mesh.n_edges), dtype=np.int64)


def div_op(mesh: PolyMesh) -> sp.csr_matrix:
    """(D ψ)_P = outward flux sum; divide by |P| for the cell divergence."""

    rows = np.concatenate([np.full(len(cell), c) for c, cell in enumerate(mesh.cells)]) if mesh.cells else []
    cols = np.concatenate([cell.index for cell in mesh.cells]) if mesh.cells else []
    data = np.concatenate([cell.sign for cell in mesh.cells]) if mesh.cells else []
    return sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_cells, mesh.n_faces), dtype=np.int64)


@dataclass
class ExactSequenceReport:
    curl_grad_zero: bool
    div_curl_zero: bool
    curl_grad_nnz: int
    div_curl_nnz: int
    euler_failures: List[int]
    n_components: int
    n_vertices: int = 0
    rank_grad: Optional[int] = None
    dim_ker_curl: Optional[int] = None
    local_failures: List[int] = field(default_factory=list)
    rank_checked: bool = False

    @property
    def ok(self) -> bool:
        # ker G holds the constants of each component; ker C = range G on a simply connected domain
        ranks_ok = not self.rank_checked or (
            self.rank_grad == self.n_vertices - self.n_components and self.dim_ker_curl == self.rank_grad
        )
        return (
            self.n_components == 1
            and self.curl_grad_zero
            and self.div_curl_zero
            and not self.euler_failures
            and not self.local_failures
            and ranks_ok
        )

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["ok"] = self.ok
        payload["euler_failures"] = self.euler_failures[:20]
        payload["local_failures"] = self.local_failures[:20]
        return payload


def _local_sequence_ok(mesh: PolyMesh, c: int, G: sp.csr_matrix, C: sp.csr_matrix) -> bool:
    """Per-cell blocks: C_P G_P = 0, signed face sum of C_P is zero, and dim curl = N_f - 1."""

    cell = mesh.cells[c]
    edges = mesh.cell_edges[c]
    verts = mesh.cell_vertices[c]
    g_loc = G[edges][:, verts].toarray()
    c_loc = C[cell.index][:, edges].toarray()
    if np.any(c_loc @ g_loc) or np.any(cell.sign @ c_loc):
        return False
    rank_c = np.linalg.matrix_rank(c_loc.astype(float))
    return rank_c == edges.size - (verts.size - 1) == cell.index.size - 1


def exact_sequence_audit(mesh: PolyMesh, rank_check: Optional[bool] = None) -> ExactSequenceReport:
    G, C, D = grad_op(mesh), curl_op(mesh), div_op(mesh)
    CG = (C @ G)
    CG.eliminate_zeros()
    DC = (D @ C)
    DC.eliminate_zeros()
    euler = [
        c
        for c, cell in enumerate(mesh.cells)
        if mesh.cell_edges[c].size - (mesh.cell_vertices[c].size - 1) != cell.index.size - 1
    ]
    adjacency = sp.csr_matrix(
        (np.ones(mesh.n_edges), (mesh.edges[:, 0], mesh.edges[:, 1])),
        shape=(mesh.n_vertices, mesh.n_vertices),
    )
    n_components, _ = connected_components(adjacency, directed=False)
    report = ExactSequenceReport(
        curl_grad_zero=CG.nnz == 0,
        div_curl_zero=DC.nnz == 0,
        curl_grad_nnz=int(CG.nnz),
        div_curl_nnz=int(DC.nnz),
        euler_failures=euler,
        n_components=int(n_components),
        n_vertices=mesh.n_vertices,
    )
    if n_components != 1:
        logger.warning("mesh has %d connected components", n_components)
    if rank_check is None:
        rank_check = mesh.n_edges <= VEMConfig.RANK_CHECK_MAX_EDGES
    if rank_check:
        rank_g = int(np.linalg.matrix_rank(G.toarray().astype(float)))
        rank_c = int(np.linalg.matrix_rank(C.toarray().astype(float)))
        report.rank_grad = rank_g
        report.dim_ker_curl = mesh.n_edges - rank_c
        report.rank_checked = True
        if rank_g != mesh.n_vertices - n_components:
            logger.warning("rank(G) = %d but N_v - components = %d", rank_g, mesh.n_vertices - n_components)
        report.local_failures = [c for c in range(mesh.n_cells) if not _local_sequence_ok(mesh, c, G, C)]
    logger.info(
        "exact-sequence audit: CG=0 %s, DC=0 %s, euler failures %d",
        report.curl_grad_zero,
        report.div_curl_zero,
        len(euler),
    )
    return report


__all__ = [
    "DofLayout",
    "VertexField",
    "EdgeField",
    "FaceField",
    "grad_op",
    "curl_op",
    "div_op",
    "exact_sequence_audit",
    "ExactSequenceReport",
]
