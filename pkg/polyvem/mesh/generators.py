"""Mesh families: structured and perturbed hexahedra, extruded polygonal meshes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..config import VEMConfig
from ..errors import ConfigError, InvalidPolygon2D, PerturbationRejected
from .core import PolyMesh, from_cell_loops

logger = logging.getLogger(__name__)

Box = Tuple[Tuple[float, float, float], Tuple[float, float, float]]
UNIT_BOX: Box = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))

# outward loops of the unit hexahedron in (i, j, k) offsets
_HEX_FACES = (
    ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)),
    ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)),
    ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)),
    ((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)),
    ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)),
    ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)),
)


def _grid_vertices(n: int, domain: Box) -> np.ndarray:
    lo, hi = np.asarray(domain[0], dtype=float), np.asarray(domain[1], dtype=float)
    ticks = [np.linspace(lo[d], hi[d], n + 1) for d in range(3)]
    zz, yy, xx = np.meshgrid(ticks[2], ticks[1], ticks[0], indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])


def _hex_loops(n: int) -> List[List[Tuple[int, ...]]]:
    def vid(i: int, j: int, k: int) -> int:
        return i + (n + 1) * (j + (n + 1) * k)

    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                cells.append(
                    [tuple(vid(i + a, j + b, k + c) for a, b, c in face) for face in _HEX_FACES]
                )
    return cells


def generate_structured_hex(n: int, domain: Box = UNIT_BOX) -> PolyMesh:
    if n < 1:
        raise ConfigError(f"structured mesh needs n >= 1, got {n}")
    return from_cell_loops(_grid_vertices(n, domain), _hex_loops(n))


def _best_fit_plane(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    center = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - center)
    return center, vt[-1]


def _replanarize(
    vertices: np.ndarray, faces: Sequence[Tuple[int, ...]], movable: np.ndarray, sweeps: int
) -> np.ndarray:
    """Jacobi sweeps: every movable vertex goes to the mean of its projections onto its face planes."""

    vertices = vertices.copy()
    for _ in range(sweeps):
        accum = np.zeros_like(vertices)
        count = np.zeros(len(vertices))
        for loop in faces:
            idx = np.asarray(loop)
            center, normal = _best_fit_plane(vertices[idx])
            offset = (vertices[idx] - center) @ normal
            accum[idx] += vertices[idx] - offset[:, None] * normal
            count[idx] += 1
        update = movable & (count > 0)
        vertices[update] = accum[update] / count[update, None]
    return vertices


def _planarity(vertices: np.ndarray, loop: Tuple[int, ...]) -> Tuple[float, float]:
    pts = vertices[np.asarray(loop)]
    center, normal = _best_fit_plane(pts)
    diff = pts[:, None, :] - pts[None, :, :]
    diameter = float(np.sqrt((diff ** 2).sum(axis=2).max()))
    return float(np.abs((pts - center) @ normal).max()), diameter


def _split_quad(vertices: np.ndarray, loop: Tuple[int, ...]) -> List[Tuple[int, ...]]:
    """Two triangles along the shorter diagonal (same diagonal for either orientation)."""

    pts = vertices[np.asarray(loop)]
    d02 = np.linalg.norm(pts[2] - pts[0])
    d13 = np.linalg.norm(pts[3] - pts[1])
    if d02 < d13 or (d02 == d13 and min(loop[0], loop[2]) < min(loop[1], loop[3])):
        i = 0
    else:
        i = 1
    a, b, c, d = (loop[(i + k) % 4] for k in range(4))
    return [(a, b, c), (c, d, a)]


def generate_perturbed_hex(
    n: int,
    domain: Box = UNIT_BOX,
    amplitude: float = 0.2,
    seed: int = 0,
    policy: Optional[str] = None,
) -> PolyMesh:
    """Structured hexahedra with interior vertices displaced by ``amplitude * h``.

    Faces left non-planar after re-planarization sweeps are split into two
    triangles (``split``) or make the call fail (``project``).
    """

    policy = (policy or VEMConfig.NONPLANAR_POLICY).lower()
    if policy not in {"split", "project"}:
        raise ConfigError(f"unknown non-planar policy: {policy}")
    if amplitude < 0.0:
        raise PerturbationRejected(f"amplitude must be non-negative, got {amplitude}")
    if amplitude > VEMConfig.PERTURBATION_MAX:
        if not VEMConfig.CLAMP_PERTURBATION:
            raise PerturbationRejected(
                f"amplitude {amplitude} exceeds {VEMConfig.PERTURBATION_MAX}; faces would lose star-shapedness"
            )
        logger.warning("clamping perturbation amplitude %.3f to %.3f", amplitude, VEMConfig.PERTURBATION_MAX)
        amplitude = VEMConfig.PERTURBATION_MAX
    if amplitude == 0.0:
        return generate_structured_hex(n, domain)

    vertices = _grid_vertices(n, domain)
    lo, hi = np.asarray(domain[0], dtype=float), np.asarray(domain[1], dtype=float)
    h = (hi - lo) / n
    on_boundary = np.any(np.isclose(vertices, lo) | np.isclose(vertices, hi), axis=1)
    rng = np.random.default_rng(seed)
    shift = amplitude * h * rng.uniform(-1.0, 1.0, size=vertices.shape)
    vertices = vertices + np.where(on_boundary[:, None], 0.0, shift)

    cells = _hex_loops(n)
    unique_faces: Dict[Tuple[int, ...], Tuple[int, ...]] = {}
    for cell in cells:
        for loop in cell:
            unique_faces.setdefault(tuple(sorted(loop)), loop)
    vertices = _replanarize(vertices, list(unique_faces.values()), ~on_boundary, VEMConfig.REPLANARIZE_SWEEPS)

    tol = VEMConfig.PLANARITY_TOL
    bent = set()
    for key, loop in unique_faces.items():
        residual, diameter = _planarity(vertices, loop)
        if residual > tol * diameter:
            bent.add(key)
    if bent and policy == "project":
        raise PerturbationRejected(f"{len(bent)} faces remain non-planar after re-planarization")
    logger.info("perturbed mesh n=%d amplitude=%.3f: %d faces split", n, amplitude, len(bent))

    split_cells = []
    for cell in cells:
        loops: List[Tuple[int, ...]] = []
        for loop in cell:
            if tuple(sorted(loop)) in bent:
                loops.extend(_split_quad(vertices, loop))
            else:
                loops.append(loop)
        split_cells.append(loops)
    return from_cell_loops(vertices, split_cells)


@dataclass
class PolygonMesh2D:
    """Planar polygons, counterclockwise, over shared points."""

    points: np.ndarray
    polygons: List[np.ndarray]
    labels: Optional[np.ndarray] = None
    label_names: Dict[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.polygons = [np.asarray(p, dtype=np.int64) for p in self.polygons]
        if self.labels is None:
            self.labels = np.zeros(len(self.polygons), dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def signed_area(self, k: int) -> float:
        pts = self.points[self.polygons[k]]
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def centroid(self, k: int) -> np.ndarray:
        pts = self.points[self.polygons[k]]
        nxt = np.roll(pts, -1, axis=0)
        cross = pts[:, 0] * nxt[:, 1] - nxt[:, 0] * pts[:, 1]
        area = 0.5 * cross.sum()
        return ((pts + nxt) * cross[:, None]).sum(axis=0) / (6.0 * area)

    def validate(self) -> None:
        if self.labels.size != len(self.polygons):
            raise InvalidPolygon2D("one label per polygon is required")
        n_points = len(self.points)
        edge_use: Dict[Tuple[int, int], int] = {}
        for k, poly in enumerate(self.polygons):
            if poly.size < 3:
                raise InvalidPolygon2D(f"polygon {k} has fewer than 3 vertices")
            if poly.min() < 0 or poly.max() >= n_points:
                raise InvalidPolygon2D(f"polygon {k} references a missing point")
            if len(set(poly.tolist())) != poly.size:
                raise InvalidPolygon2D(f"polygon {k} repeats a vertex")
            if self.signed_area(k) <= 0.0:
                raise InvalidPolygon2D(f"polygon {k} is not counterclockwise or is degenerate")
            for a, b in zip(poly, np.roll(poly, -1)):
                key = (int(a), int(b))
                if key in edge_use:
                    raise InvalidPolygon2D(f"directed edge {key} used twice (polygons overlap)")
                edge_use[key] = k

    def triangulated(self) -> "PolygonMesh2D":
        polygons, labels = [], []
        for poly, label in zip(self.polygons, self.labels):
            for i in range(1, poly.size - 1):
                polygons.append(np.array([poly[0], poly[i], poly[i + 1]]))
                labels.append(label)
        return PolygonMesh2D(self.points, polygons, np.asarray(labels), dict(self.label_names))


def unit_square_2d() -> PolygonMesh2D:
    return PolygonMesh2D(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), [np.arange(4)])


def regular_polygon_2d(sides: int = 6, radius: float = 1.0) -> PolygonMesh2D:
    theta = 2.0 * np.pi * np.arange(sides) / sides
    return PolygonMesh2D(radius * np.column_stack([np.cos(theta), np.sin(theta)]), [np.arange(sides)])


def ring_counts(radii: Sequence[float]) -> List[int]:
    """Vertices per circle: start with 6 and double when the arc would exceed twice the ring width."""

    counts: List[int] = []
    prev = 0.0
    for k, rho in enumerate(radii):
        width = rho - prev
        if k == 0:
            counts.append(6)
        else:
            m = counts[-1]
            counts.append(2 * m if 2.0 * np.pi * rho / m > 2.0 * width else m)
        prev = rho
    return counts


def disk_mesh_2d(
    radii: Sequence[float],
    thresholds: Sequence[float] = (),
    names: Optional[Mapping[int, str]] = None,
) -> PolygonMesh2D:
    """Concentric rings: a hexagonal core, quadrilaterals, pentagons where the count doubles.

    ``thresholds`` split cells into labels by centroid radius.
    """

    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip([0.0] + radii, radii)):
        raise InvalidPolygon2D("ring radii must be positive and strictly increasing")
    counts = ring_counts(radii)
    points: List[np.ndarray] = []
    starts: List[int] = []
    for rho, m in zip(radii, counts):
        starts.append(sum(len(p) for p in points))
        theta = 2.0 * np.pi * np.arange(m) / m
        points.append(rho * np.column_stack([np.cos(theta), np.sin(theta)]))
    polygons: List[np.ndarray] = [np.arange(starts[0], starts[0] + 6)]
    for k in range(1, len(radii)):
        m_in, m_out = counts[k - 1], counts[k]
        s_in, s_out = starts[k - 1], starts[k]
        for i in range(m_in):
            inner = (s_in + i, s_in + (i + 1) % m_in)
            if m_out == m_in:
                outer = [s_out + i, s_out + (i + 1) % m_out]
            else:
                outer = [s_out + 2 * i, s_out + 2 * i + 1, s_out + (2 * i + 2) % m_out]
            polygons.append(np.array(outer + [inner[1], inner[0]]))
    mesh = PolygonMesh2D(np.vstack(points), polygons, None, dict(names or {}))
    if thresholds:
        radius = np.array([np.linalg.norm(mesh.centroid(k)) for k in range(len(polygons))])
        mesh.labels = np.searchsorted(np.asarray(thresholds, dtype=float), radius).astype(np.int64)
    return mesh


def generate_extruded(
    polygon_mesh_2d: PolygonMesh2D,
    layers: int = 1,
    height: float = 1.0,
    z_levels: Optional[Sequence[float]] = None,
    z_labels: Optional[Sequence[Optional[Mapping[int, int]]]] = None,
) -> PolyMesh:
    """Prisms over every polygon; ``z_levels`` overrides uniform layering.

    ``z_labels[l]`` optionally remaps 2D labels for layer ``l`` (used to carve
    finite-height parts out of a cylinder).
    """

    polygon_mesh_2d.validate()
    if z_levels is None:
        if layers < 1:
            raise InvalidPolygon2D(f"extrusion needs at least one layer, got {layers}")
        z_levels = np.linspace(0.0, height, layers + 1)
    z_levels = np.asarray(z_levels, dtype=float)
    if np.any(np.diff(z_levels) <= 0.0):
        raise InvalidPolygon2D("extrusion levels must increase")
    n = len(polygon_mesh_2d.points)
    vertices = np.vstack(
        [np.column_stack([polygon_mesh_2d.points, np.full(n, z)]) for z in z_levels]
    )
    cells, labels = [], []
    for layer in range(len(z_levels) - 1):
        lo, hi = layer * n, (layer + 1) * n
        remap = z_labels[layer] if z_labels is not None else None
        for poly, label in zip(polygon_mesh_2d.polygons, polygon_mesh_2d.labels):
            ring = [int(v) for v in poly]
            loops = [tuple(lo + v for v in reversed(ring)), tuple(hi + v for v in ring)]
            for a, b in zip(ring, ring[1:] + ring[:1]):
                loops.append((lo + a, lo + b, hi + b, hi + a))
            cells.append(loops)
            label = int(label)
            labels.append(remap.get(label, label) if remap else label)
    return from_cell_loops(vertices, cells, labels, polygon_mesh_2d.label_names)


# -- case geometries ----------------------------------------------------------

ANNULUS_RADII = (0.5, 1.0, 1.25)
ANNULUS_HEIGHT = 0.5
ANNULUS_NAMES = {0: "S1", 1: "M", 2: "S2"}


def generate_annulus(level: int, triangulated: bool = False) -> PolyMesh:
    """Cylinder of radius c split into S1 (r<a), M (a<r<b), S2 (b<r<c), height 0.5."""

    if level < 1:
        raise ConfigError(f"annulus level must be >= 1, got {level}")
    a, b, c = ANNULUS_RADII
    delta = 0.25 / level
    radii = delta * np.arange(1, round(c / delta) + 1)
    disk = disk_mesh_2d(radii, thresholds=(a, b), names=ANNULUS_NAMES)
    if triangulated:
        disk = disk.triangulated()
    return generate_extruded(disk, layers=2 * level, height=ANNULUS_HEIGHT)


ELECTROMAGNET_NAMES = {0: "A", 1: "C", 2: "T"}
_CORE_RADIUS, _COIL_INNER, _COIL_OUTER, _AIR_RADIUS = 0.25, 0.35, 0.55, 1.0
_CORE_HALF_HEIGHT, _COIL_HALF_HEIGHT, _AIR_HALF_HEIGHT = 0.5, 0.25, 1.0


def generate_electromagnet(level: int) -> PolyMesh:
    """Air cylinder holding an iron core (C) surrounded by a rectangular-section coil (T).

    Level 1 has 215 cells and level 2 has 2110. Level l splits every radial and
    axial region into l layers, two for the outer air ring.
    """

    if level < 1:
        raise ConfigError(f"electromagnet level must be >= 1, got {level}")
    breaks = [
        (0.0, _CORE_RADIUS, 1),
        (_CORE_RADIUS, _COIL_INNER, 1),
        (_COIL_INNER, _COIL_OUTER, 1),
        (_COIL_OUTER, _AIR_RADIUS, 2),
    ]
    radii: List[float] = []
    for lo, hi, parts in breaks:
        radii.extend(np.linspace(lo, hi, parts * level + 1)[1:].tolist())
    # 2D labels: 0 core disk, 1 gap, 2 coil ring, 3 outer air
    disk = disk_mesh_2d(radii, thresholds=(_CORE_RADIUS, _COIL_INNER, _COIL_OUTER))
    z_breaks = [
        (-_AIR_HALF_HEIGHT, -_CORE_HALF_HEIGHT, 1),
        (-_CORE_HALF_HEIGHT, -_COIL_HALF_HEIGHT, 1),
        (-_COIL_HALF_HEIGHT, _COIL_HALF_HEIGHT, 1),
        (_COIL_HALF_HEIGHT, _CORE_HALF_HEIGHT, 1),
        (_CORE_HALF_HEIGHT, _AIR_HALF_HEIGHT, 1),
    ]
    z_levels: List[float] = [-_AIR_HALF_HEIGHT]
    z_labels: List[Dict[int, int]] = []
    for lo, hi, parts in z_breaks:
        z_levels.extend(np.linspace(lo, hi, parts * level + 1)[1:].tolist())
        mid = 0.5 * (lo + hi)
        in_core = abs(mid) < _CORE_HALF_HEIGHT
        in_coil = abs(mid) < _COIL_HALF_HEIGHT
        remap = {0: 1 if in_core else 0, 1: 0, 2: 2 if in_coil else 0, 3: 0}
        z_labels.extend([remap] * (parts * level))
    disk.label_names = dict(ELECTROMAGNET_NAMES)
    return generate_extruded(disk, z_levels=z_levels, z_labels=z_labels)


def generate_extruded_hexagon(layers: int = 2) -> PolyMesh:
    return generate_extruded(regular_polygon_2d(6), layers=layers, height=1.0)


def parse_mesh_descriptor(descriptor: str, family_alias: Optional[str] = None) -> PolyMesh:
    """Build a mesh from ``kind:args`` (structured:4, perturbed:4:0.2:7, annulus:2, file:m.json ...).

    ``extruded:L`` resolves to ``family_alias`` when a case provides one.
    """

    kind, _, rest = descriptor.partition(":")
    kind = kind.strip().lower()
    args = [a for a in rest.split(":")] if rest else []
    if kind == "extruded" and family_alias:
        kind = family_alias
    try:
        if kind == "structured":
            return generate_structured_hex(int(args[0]))
        if kind == "perturbed":
            amplitude = float(args[1]) if len(args) > 1 else 0.2
            seed = int(args[2]) if len(args) > 2 else 0
            return generate_perturbed_hex(int(args[0]), amplitude=amplitude, seed=seed)
        if kind in {"extruded-hexagon", "hexagon"}:
            return generate_extruded_hexagon(int(args[0]) if args else 2)
        if kind == "annulus":
            return generate_annulus(int(args[0]))
        if kind == "annulus-tri":
            return generate_annulus(int(args[0]), triangulated=True)
        if kind == "electromagnet":
            return generate_electromagnet(int(args[0]))
        if kind == "file":
            from .io import load_mesh

            return load_mesh(rest)
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed mesh descriptor {descriptor!r}: {exc}") from exc
    raise ConfigError(f"unknown mesh family in descriptor {descriptor!r}")


__all__ = [
    "UNIT_BOX",
    "PolygonMesh2D",
    "generate_structured_hex",
    "generate_perturbed_hex",
    "generate_extruded",
    "generate_extruded_hexagon",
    "generate_annulus",
    "generate_electromagnet",
    "unit_square_2d",
    "regular_polygon_2d",
    "disk_mesh_2d",
    "ring_counts",
    "parse_mesh_descriptor",
]
