"""
system.py — інтерполяція даних, збірка сідлової системи, граничні умови та розв'язання
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Callable, Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, minres, splu

from .config import VEMConfig, worker_count
from .errors import (
    ConfigError,
    EmptyInterior,
    NotImplementedFormulation,
    SolverBreakdown,
    ToleranceNotReached,
)
from .localforms import LocalElementOps, build_local_ops
from .mesh.core import PolyMesh
from .projections import FaceEdgeProjection, proj_edge_face
from .quadrature import edge_rule, face_rule
from .spaces import DofLayout, EdgeField, FaceField, VertexField, curl_op, grad_op

logger = logging.getLogger(__name__)

VectorField = Callable[[np.ndarray, Optional[int]], np.ndarray]
BoundaryCondition = Literal["dirichlet", "neumann"]

EDGE_POINTS = 4
FACE_DEGREE = 6


@dataclass(frozen=True, eq=False)
class CaseSpec:
    """Manufactured or physical problem: materials, current, optional exact field, boundary type.

    Vector fields take ``(points, subdomain)``; ``subdomain`` is ``None`` where
    the field is continuous across materials (edge interpolation).
    ``current_potential`` is any T with curl T = j; when present (or when the
    exact H is known) face currents are taken as circulations of T, so the
    interpolated current lies in the range of the discrete curl.
    """

    name: str
    mu: Mapping[int, float]
    current: VectorField
    bc: BoundaryCondition
    exact_H: Optional[VectorField] = None
    current_potential: Optional[VectorField] = None
    subdomain_names: Mapping[int, str] = field(default_factory=dict)
    mesh_family: str = "structured"
    lift_boundary: bool = False
    energy_scale: float = 1.0
    reference_energies: Mapping[str, float] = field(default_factory=dict)
    analytic_energies: Optional[Callable[[PolyMesh], Dict[str, float]]] = None
    description: str = ""
    # piecewise-constant data whose normal jumps are checked against each mesh
    piecewise_current: bool = False

    def permeability(self, mesh: PolyMesh) -> np.ndarray:
        missing = sorted(set(np.unique(mesh.subdomain).tolist()) - set(self.mu))
        if missing:
            raise ConfigError(f"case {self.name}: no permeability for subdomains {missing}")
        return np.array([float(self.mu[int(s)]) for s in mesh.subdomain])

    def subdomain_name(self, label: int) -> str:
        return str(self.subdomain_names.get(int(label), label))


def interpolate_field(H: VectorField, mesh: PolyMesh, n_points: int = EDGE_POINTS) -> EdgeField:
    """Edge moments ∫_e H·t_e with an ``n_points`` Gauss rule per edge."""

    if mesh.n_edges == 0:
        return EdgeField(np.zeros(0))
    points, weights = zip(*(edge_rule(mesh, e, n_points) for e in range(mesh.n_edges)))
    values = np.asarray(H(np.concatenate(points), None), dtype=float).reshape(mesh.n_edges, n_points, 3)
    tangential = np.einsum("enc,ec->en", values, mesh.edge_tangents)
    return EdgeField(np.einsum("en,en->e", tangential, np.asarray(weights)))


def interpolate_current(j: VectorField, mesh: PolyMesh, degree: int = FACE_DEGREE) -> FaceField:
    """Face fluxes ∫_f j·n_f; piecewise data is evaluated in the subdomain of the face's first cell."""

    values = np.zeros(mesh.n_faces)
    owner_sub = mesh.subdomain[mesh.face_owner]
    for f in range(mesh.n_faces):
        points, weights = face_rule(mesh, f, degree)
        flux = np.asarray(j(points, int(owner_sub[f])), dtype=float) @ mesh.face_normals[f]
        values[f] = weights @ flux
    return FaceField(values)


def interpolate_current_from_potential(T: VectorField, mesh: PolyMesh) -> FaceField:
    """∫_f j·n_f = ∮_{∂f} T·t for curl T = j, using the edge interpolant of T."""

    return FaceField(curl_op(mesh) @ interpolate_field(T, mesh).values)


def interpolate_case_current(case: CaseSpec, mesh: PolyMesh) -> FaceField:
    potential = case.current_potential or case.exact_H
    if potential is not None:
        return interpolate_current_from_potential(potential, mesh)
    return interpolate_current(case.current, mesh)


def _parallel_map(func: Callable, items: Sequence, threads: Optional[int] = None) -> List:
    threads = threads or worker_count()
    if threads <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _block_scatter(blocks: Sequence[Tuple[np.ndarray, np.ndarray]], size: int) -> sp.csr_matrix:
    rows = np.concatenate([np.repeat(idx, idx.size) for idx, _ in blocks])
    cols = np.concatenate([np.tile(idx, idx.size) for idx, _ in blocks])
    data = np.concatenate([mat.reshape(-1) for _, mat in blocks])
    return sp.coo_matrix((data, (rows, cols)), shape=(size, size)).tocsr()


@dataclass(eq=False)
class SaddleSystem:
    """Reduced block system [[A, Bᵀ], [B, 0]] with boundary bookkeeping.

    Unknown order: free edges, free vertices, then the mean-value multiplier
    when ``anchored``.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    A: sp.csr_matrix
    B: sp.csr_matrix
    edge_mass: sp.csr_matrix
    face_mass: sp.csr_matrix
    curl: sp.csr_matrix
    grad: sp.csr_matrix
    current: FaceField
    free_edges: np.ndarray
    free_vertices: np.ndarray
    lifted: np.ndarray
    bc: BoundaryCondition
    anchored: bool
    layout: DofLayout
    local_ops: List[LocalElementOps]
    t_assemble: float = 0.0

    @property
    def n_unknowns(self) -> int:
        return int(self.matrix.shape[0])

    def expand(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        H = self.lifted.copy()
        H[self.free_edges] = x[: self.free_edges.size]
        p = np.zeros(self.layout.n_vertex)
        p[self.free_vertices] = x[self.free_edges.size : self.free_edges.size + self.free_vertices.size]
        return H, p

    def spectral_bounds(self) -> Dict[str, float]:
        edge = np.array([op.edge_spectrum for op in self.local_ops])
        face = np.array([op.face_spectrum for op in self.local_ops])
        return {
            "edge_min": float(edge[:, 0].min()),
            "edge_max": float(edge[:, 1].max()),
            "face_min": float(face[:, 0].min()),
            "face_max": float(face[:, 1].max()),
        }


def assemble(
    case: CaseSpec,
    mesh: PolyMesh,
    current: Optional[FaceField] = None,
    threads: Optional[int] = None,
) -> SaddleSystem:
    if VEMConfig.FORMULATION != "kikuchi":
        raise NotImplementedFormulation(f"formulation {VEMConfig.FORMULATION!r} is reserved, not implemented")
    start = time.perf_counter()
    mu = case.permeability(mesh)
    layout = DofLayout.from_mesh(mesh)

    face_ops: List[FaceEdgeProjection] = _parallel_map(partial(proj_edge_face, mesh), range(mesh.n_faces), threads)
    local_ops: List[LocalElementOps] = _parallel_map(
        lambda c: build_local_ops(mesh, c, mu[c], face_ops), range(mesh.n_cells), threads
    )
    edge_mass = _block_scatter([(op.edges, op.weighted_edge_matrix) for op in local_ops], mesh.n_edges)
    face_mass = _block_scatter([(op.faces, op.face_matrix) for op in local_ops], mesh.n_faces)

    C = curl_op(mesh).astype(float)
    G = grad_op(mesh).astype(float)
    A = (C.T @ face_mass @ C).tocsr()
    A = (0.5 * (A + A.T)).tocsr()
    B = (G.T @ edge_mass).tocsr()
    if current is None:
        current = interpolate_case_current(case, mesh)
    rhs_edge = C.T @ (face_mass @ current.values)

    ne, nv = mesh.n_edges, mesh.n_vertices
    full = sp.bmat([[A, B.T], [B, None]], format="csr")
    full_rhs = np.concatenate([rhs_edge, np.zeros(nv)])
    lifted = np.zeros(ne)

    if case.bc == "dirichlet":
        free_edges = layout.interior_edges
        free_vertices = layout.interior_vertices
        if free_edges.size == 0:
            raise EmptyInterior(f"mesh with {mesh.n_cells} cells has no interior edges for a Dirichlet problem")
        if case.lift_boundary and case.exact_H is not None:
            boundary = np.flatnonzero(layout.boundary_edge)
            lifted[boundary] = interpolate_field(case.exact_H, mesh).values[boundary]
        free = np.concatenate([free_edges, ne + free_vertices])
        fixed = np.setdiff1d(np.arange(ne + nv), free)
        values = np.concatenate([lifted, np.zeros(nv)])
        matrix = full[free][:, free].tocsr()
        rhs = full_rhs[free] - full[free][:, fixed] @ values[fixed]
        anchored = False
    elif case.bc == "neumann":
        free_edges = np.arange(ne)
        free_vertices = np.arange(nv)
        ones = sp.csr_matrix(np.ones((1, nv)))
        zero_e = sp.csr_matrix((1, ne))
        border = sp.hstack([zero_e, ones]).tocsr()
        matrix = sp.bmat([[full, border.T], [border, None]], format="csr")
        rhs = np.concatenate([full_rhs, [0.0]])
        anchored = True
    else:
        raise ConfigError(f"unknown boundary condition {case.bc!r}")

    elapsed = time.perf_counter() - start
    logger.info(
        "assembled %s on %d cells: %d unknowns, nnz=%d in %.2fs",
        case.name,
        mesh.n_cells,
        matrix.shape[0],
        matrix.nnz,
        elapsed,
    )
    return SaddleSystem(
        matrix=matrix,
        rhs=rhs,
        A=A,
        B=B,
        edge_mass=edge_mass,
        face_mass=face_mass,
        curl=C.tocsr(),
        grad=G.tocsr(),
        current=current,
        free_edges=free_edges,
        free_vertices=free_vertices,
        lifted=lifted,
        bc=case.bc,
        anchored=anchored,
        layout=layout,
        local_ops=local_ops,
        t_assemble=elapsed,
    )


@dataclass
class SolveStats:
    solver: str
    residual: float
    iterations: int
    p_inf: float
    curl_residual: float
    gauge_residual: float
    n_unknowns: int
    t_solve: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def backward_error(matrix: sp.spmatrix, x: np.ndarray, b: np.ndarray) -> float:
    r = b - matrix @ x
    norm_k = float(abs(matrix).sum(axis=1).max()) if matrix.nnz else 0.0
    denom = norm_k * float(np.abs(x).max(initial=0.0)) + float(np.abs(b).max(initial=0.0))
    num = float(np.abs(r).max(initial=0.0))
    return num / denom if denom > 0.0 else num


def _solve_direct(system: SaddleSystem, tol: float) -> Tuple[np.ndarray, int]:
    K = system.matrix.tocsc()
    try:
        lu = splu(K)
    except RuntimeError as exc:
        raise SolverBreakdown(f"sparse factorization failed: {exc}") from exc
    x = lu.solve(system.rhs)
    steps = 0
    # iterative refinement with the same factors
    while steps < 3 and backward_error(K, x, system.rhs) > tol:
        x = x + lu.solve(system.rhs - K @ x)
        steps += 1
    return x, steps


def _block_preconditioner(system: SaddleSystem) -> LinearOperator:
    fe, fv = system.free_edges, system.free_vertices
    ne = fe.size
    edge_block = (system.A + system.edge_mass)[fe][:, fe].tocsc()
    grad = system.grad[fe][:, fv]
    schur = (grad.T @ system.edge_mass[fe][:, fe] @ grad).tocsc()
    if system.anchored:
        diag = schur.diagonal()
        shift = 1e-8 * float(diag.mean()) if diag.size else 1.0
        schur = (schur + shift * sp.identity(schur.shape[0], format="csc")).tocsc()
    try:
        lu_e = splu(edge_block)
        lu_s = splu(schur)
    except RuntimeError as exc:
        raise SolverBreakdown(f"preconditioner factorization failed: {exc}") from exc
    n = system.n_unknowns

    def apply(r: np.ndarray) -> np.ndarray:
        out = np.array(r, dtype=float, copy=True)
        out[:ne] = lu_e.solve(r[:ne])
        out[ne : ne + fv.size] = lu_s.solve(r[ne : ne + fv.size])
        return out

    return LinearOperator((n, n), matvec=apply, dtype=float)


def _solve_minres(system: SaddleSystem, tol: float, maxiter: int) -> Tuple[np.ndarray, int]:
    precond = _block_preconditioner(system)
    count = [0]

    def callback(_xk: np.ndarray) -> None:
        count[0] += 1

    x = np.zeros(system.n_unknowns)
    for _restart in range(4):
        x, info = minres(system.matrix, system.rhs, x0=x, rtol=tol, maxiter=maxiter, M=precond, callback=callback)
        if info < 0:
            raise SolverBreakdown(f"MINRES breakdown (info={info})")
        if backward_error(system.matrix, x, system.rhs) <= tol:
            break
    return x, count[0]


def solve(
    system: SaddleSystem,
    solver: Optional[str] = None,
    tol: Optional[float] = None,
    maxiter: Optional[int] = None,
) -> Tuple[EdgeField, VertexField, SolveStats]:
    """Direct sparse LU by default (scipy has no sparse LDLᵀ); MINRES with a block-diagonal preconditioner on request."""

    solver = (solver or VEMConfig.SOLVER).lower()
    tol = VEMConfig.SOLVER_TOL if tol is None else tol
    maxiter = VEMConfig.SOLVER_MAXITER if maxiter is None else maxiter
    start = time.perf_counter()
    if solver == "direct":
        x, iterations = _solve_direct(system, tol)
    elif solver == "minres":
        x, iterations = _solve_minres(system, tol, maxiter)
    else:
        raise ConfigError(f"unknown solver {solver!r}")
    elapsed = time.perf_counter() - start
    if not np.all(np.isfinite(x)):
        raise SolverBreakdown("solution contains non-finite values")
    residual = backward_error(system.matrix, x, system.rhs)
    if residual > tol:
        raise ToleranceNotReached(f"{solver} residual {residual:.3e} above tolerance {tol:.1e}")

    H, p = system.expand(x)
    j_I = system.current.values
    mismatch = float(np.abs(system.curl @ H - j_I).max(initial=0.0))
    scale = float(np.abs(j_I).max(initial=0.0))
    curl_residual = mismatch / scale if scale > 0.0 else mismatch
    gauge = system.B @ H
    gauge_free = gauge[system.free_vertices]
    gauge_scale = float(abs(system.B).sum(axis=1).max()) * float(np.abs(H).max(initial=0.0))
    gauge_residual = float(np.abs(gauge_free).max(initial=0.0))
    if gauge_scale > 0.0:
        gauge_residual /= gauge_scale
    stats = SolveStats(
        solver=solver,
        residual=residual,
        iterations=int(iterations),
        p_inf=float(np.abs(p).max(initial=0.0)),
        curl_residual=curl_residual,
        gauge_residual=gauge_residual,
        n_unknowns=system.n_unknowns,
        t_solve=elapsed,
    )
    logger.info(
        "solved with %s in %.2fs: residual %.2e, |p|_inf %.2e, curl residual %.2e",
        solver,
        elapsed,
        residual,
        stats.p_inf,
        curl_residual,
    )
    return EdgeField(H, system.layout), VertexField(p, system.layout), stats


__all__ = [
    "CaseSpec",
    "VectorField",
    "SaddleSystem",
    "SolveStats",
    "interpolate_field",
    "interpolate_current",
    "interpolate_current_from_potential",
    "interpolate_case_current",
    "assemble",
    "solve",
    "backward_error",
]
