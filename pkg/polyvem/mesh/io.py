"""Mesh persistence: versioned native JSON and legacy ASCII VTK (polyhedral cells)."""

from __future__ import annotations

import json
import logging
from collections import deque
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..errors import ConfigError, ParseError
from .core import PolyMesh, SignedIndex, from_cell_loops
from .validate import validate

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FORMATS = ("native-json", "vtk-polyhedral")

VTK_TETRA, VTK_HEXAHEDRON, VTK_WEDGE, VTK_POLYHEDRON = 10, 12, 13, 42

# local face loops of standard VTK cells (orientation fixed afterwards)
_STANDARD_FACES = {
    VTK_TETRA: ((0, 1, 2), (0, 1, 3), (1, 2, 3), (0, 2, 3)),
    VTK_HEXAHEDRON: ((0, 1, 2, 3), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)),
    VTK_WEDGE: ((0, 1, 2), (3, 4, 5), (0, 1, 4, 3), (1, 2, 5, 4), (2, 0, 3, 5)),
}


def _nonzero_refs(value: List[int]) -> List[int]:
    if any(v == 0 for v in value):
        raise ValueError("signed references are 1-based; 0 is not allowed")
    return value


class FaceModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    edges: List[int] = Field(min_length=3)

    @field_validator("edges")
    @classmethod
    def _signed_edges(cls, value: List[int]) -> List[int]:
        return _nonzero_refs(value)


class CellModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    faces: List[int] = Field(min_length=4)
    subdomain: int = 0

    @field_validator("faces")
    @classmethod
    def _signed_faces(cls, value: List[int]) -> List[int]:
        return _nonzero_refs(value)


class MeshFile(BaseModel):
    """Native mesh document. Vertex and edge indices are 0-based; signed face/cell references are 1-based."""

    model_config = ConfigDict(extra="forbid")

    version: int = SCHEMA_VERSION
    vertices: List[Tuple[float, float, float]]
    edges: List[Tuple[int, int]]
    faces: List[FaceModel]
    cells: List[CellModel]
    boundary_faces: List[int] = Field(default_factory=list)
    subdomain_names: Dict[int, str] = Field(default_factory=dict)

    @field_validator("version")
    @classmethod
    def _known_version(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {value}")
        return value


def _signed(refs: Sequence[int]) -> SignedIndex:
    arr = np.asarray(refs, dtype=np.int64)
    return SignedIndex(np.abs(arr) - 1, np.sign(arr))


def mesh_to_document(mesh: PolyMesh) -> Dict[str, Any]:
    return {
        "version": SCHEMA_VERSION,
        "vertices": mesh.vertices.tolist(),
        "edges": mesh.edges.tolist(),
        "faces": [{"edges": ((f.index + 1) * f.sign).tolist()} for f in mesh.faces],
        "cells": [
            {"faces": ((c.index + 1) * c.sign).tolist(), "subdomain": int(s)}
            for c, s in zip(mesh.cells, mesh.subdomain)
        ],
        "boundary_faces": np.flatnonzero(mesh.boundary_face).tolist(),
        "subdomain_names": {str(k): v for k, v in mesh.subdomain_names.items()},
    }


def mesh_from_document(doc: MeshFile) -> PolyMesh:
    boundary = np.zeros(len(doc.faces), dtype=bool)
    for f in doc.boundary_faces:
        if not 0 <= f < len(doc.faces):
            raise ParseError(f"boundary face {f} out of range")
        boundary[f] = True
    return PolyMesh(
        vertices=np.asarray(doc.vertices, dtype=float).reshape(-1, 3),
        edges=np.asarray(doc.edges, dtype=np.int64).reshape(-1, 2),
        faces=tuple(_signed(face.edges) for face in doc.faces),
        cells=tuple(_signed(cell.faces) for cell in doc.cells),
        boundary_face=boundary,
        subdomain=np.asarray([cell.subdomain for cell in doc.cells], dtype=np.int64),
        subdomain_names=doc.subdomain_names,
    )


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text (byte {exc.start})") from exc


def _load_json(path: Path) -> PolyMesh:
    try:
        raw = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    try:
        doc = MeshFile.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        location = ".".join(str(part) for part in err["loc"])
        raise ParseError(f"{path}: {location}: {err['msg']}") from exc
    return mesh_from_document(doc)


# -- VTK ---------------------------------------------------------------------


class _Tokens:
    def __init__(self, text: str) -> None:
        self._items: List[Tuple[str, int]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            self._items.extend((tok, lineno) for tok in line.split())
        self._pos = 0

    def done(self) -> bool:
        return self._pos >= len(self._items)

    def peek(self) -> Tuple[str, int]:
        return self._items[self._pos]

    def next(self) -> Tuple[str, int]:
        if self.done():
            line = self._items[-1][1] if self._items else 0
            raise ParseError("unexpected end of file", line=line)
        item = self._items[self._pos]
        self._pos += 1
        return item

    def count(self) -> int:
        value = int(self.numbers(1, int)[0])
        if value < 0:
            raise ParseError(f"negative count {value}", line=self._items[self._pos - 1][1])
        return value

    def numbers(self, count: int, kind: type) -> np.ndarray:
        out = np.empty(count, dtype=float if kind is float else np.int64)
        for i in range(count):
            tok, line = self.next()
            try:
                out[i] = kind(tok)
            except ValueError as exc:
                raise ParseError(f"expected {kind.__name__}, got {tok!r}", line=line) from exc
        return out


def _orient_outward(vertices: np.ndarray, loops: List[Tuple[int, ...]]) -> List[Tuple[int, ...]]:
    """Make the loops of one cell agree on every shared edge, then point them outward.

    Loops are propagated face by face so a shared edge is walked in opposite
    directions; the signed volume from the divergence theorem fixes the global sign.
    """

    owners: Dict[Tuple[int, int], List[int]] = {}
    for k, loop in enumerate(loops):
        for a, b in zip(loop, loop[1:] + loop[:1]):
            owners.setdefault((min(a, b), max(a, b)), []).append(k)
    oriented: List[Optional[Tuple[int, ...]]] = [None] * len(loops)
    for seed in range(len(loops)):
        if oriented[seed] is not None:
            continue
        oriented[seed] = loops[seed]
        queue = deque([seed])
        while queue:
            k = queue.popleft()
            loop = oriented[k]
            for a, b in zip(loop, loop[1:] + loop[:1]):
                for other in owners[(min(a, b), max(a, b))]:
                    if oriented[other] is not None:
                        continue
                    candidate = loops[other]
                    walks_same = any(
                        (u, v) == (a, b) for u, v in zip(candidate, candidate[1:] + candidate[:1])
                    )
                    oriented[other] = tuple(reversed(candidate)) if walks_same else candidate
                    queue.append(other)
    volume = 0.0
    for loop in oriented:
        pts = vertices[np.asarray(loop)]
        area_vector = 0.5 * np.cross(pts, np.roll(pts, -1, axis=0)).sum(axis=0)
        volume += pts.mean(axis=0) @ area_vector / 3.0
    if volume < 0.0:
        return [tuple(reversed(loop)) for loop in oriented]
    return list(oriented)


def _polyhedron_loops(path: Path, cell: int, payload: np.ndarray) -> List[Tuple[int, ...]]:
    n_faces = int(payload[0])
    loops, k = [], 1
    for _ in range(n_faces):
        if k >= payload.size or k + 1 + int(payload[k]) > payload.size:
            raise ParseError(f"{path}: face stream of cell {cell} is truncated")
        m = int(payload[k])
        loops.append(tuple(int(v) for v in payload[k + 1 : k + 1 + m]))
        k += 1 + m
    if k != payload.size:
        raise ParseError(f"{path}: face stream of cell {cell} has trailing entries")
    return loops


def _read_vtk(path: Path) -> PolyMesh:
    lines = _read_text(path).splitlines()
    if len(lines) < 4 or not lines[0].lower().startswith("# vtk datafile"):
        raise ParseError(f"{path}: missing VTK header", line=1)
    if lines[2].strip().upper() != "ASCII":
        raise ParseError(f"{path}: only ASCII legacy files are supported", line=3)
    if lines[3].split()[-1].upper() != "UNSTRUCTURED_GRID":
        raise ParseError(f"{path}: dataset must be UNSTRUCTURED_GRID", line=4)
    tokens = _Tokens("\n".join([""] * 4 + lines[4:]))
    vertices: Optional[np.ndarray] = None
    cells_raw: Optional[np.ndarray] = None
    n_cells = 0
    types: Optional[np.ndarray] = None
    subdomain: Optional[np.ndarray] = None
    while not tokens.done():
        keyword, line = tokens.next()
        keyword = keyword.upper()
        if keyword == "POINTS":
            count = tokens.count()
            tokens.next()
            vertices = tokens.numbers(3 * count, float).reshape(-1, 3)
        elif keyword == "CELLS":
            n_cells = tokens.count()
            size = tokens.count()
            cells_raw = tokens.numbers(size, int)
        elif keyword == "CELL_TYPES":
            types = tokens.numbers(tokens.count(), int)
        elif keyword == "CELL_DATA":
            count = tokens.count()
            while not tokens.done() and tokens.peek()[0].upper() in {"SCALARS", "VECTORS"}:
                kind = tokens.next()[0].upper()
                name = tokens.next()[0]
                tokens.next()
                if kind == "SCALARS":
                    n_comp = 1
                    if not tokens.peek()[0].upper() == "LOOKUP_TABLE" and tokens.peek()[0].isdigit():
                        n_comp = tokens.count()
                    if tokens.peek()[0].upper() == "LOOKUP_TABLE":
                        tokens.next()
                        tokens.next()
                    values = tokens.numbers(count * n_comp, float)
                    if name.lower() == "subdomain":
                        subdomain = values.astype(np.int64)
                else:
                    tokens.numbers(3 * count, float)
        elif keyword in {"POINT_DATA", "FIELD"}:
            break
        elif keyword in {"OFFSETS", "CONNECTIVITY"}:
            raise ParseError(f"{path}: VTK 5 cell layout is not supported", line=line)
        else:
            raise ParseError(f"{path}: unexpected keyword {keyword!r}", line=line)
    if vertices is None or cells_raw is None or types is None:
        raise ParseError(f"{path}: POINTS, CELLS and CELL_TYPES sections are required")
    if types.size != n_cells:
        raise ParseError(f"{path}: CELL_TYPES count {types.size} differs from CELLS count {n_cells}")

    cell_loops: List[List[Tuple[int, ...]]] = []
    pos = 0
    for c, ctype in enumerate(types):
        if pos >= cells_raw.size:
            raise ParseError(f"{path}: CELLS lists fewer than {n_cells} cells")
        count = int(cells_raw[pos])
        if count < 1 or pos + 1 + count > cells_raw.size:
            raise ParseError(f"{path}: cell {c} runs past the end of CELLS")
        payload = cells_raw[pos + 1 : pos + 1 + count]
        pos += 1 + count
        if ctype == VTK_POLYHEDRON:
            loops = _polyhedron_loops(path, c, payload)
        elif ctype in _STANDARD_FACES:
            n_nodes = max(max(face) for face in _STANDARD_FACES[int(ctype)]) + 1
            if payload.size != n_nodes:
                raise ParseError(f"{path}: cell {c} of type {ctype} needs {n_nodes} points, got {payload.size}")
            loops = [tuple(int(payload[i]) for i in face) for face in _STANDARD_FACES[int(ctype)]]
        else:
            raise ParseError(f"{path}: unsupported cell type {ctype} for cell {c}")
        if any(v < 0 or v >= len(vertices) for loop in loops for v in loop):
            raise ParseError(f"{path}: cell {c} references a missing point")
        cell_loops.append(_orient_outward(vertices, loops))
    if pos != cells_raw.size:
        raise ParseError(f"{path}: CELLS size does not match its contents")
    return from_cell_loops(vertices, cell_loops, subdomain)


def write_vtk_polyhedra(
    mesh: PolyMesh,
    path: Union[str, Path],
    cell_scalars: Optional[Dict[str, np.ndarray]] = None,
    cell_vectors: Optional[Dict[str, np.ndarray]] = None,
    title: str = "polyvem mesh",
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records: List[List[int]] = []
    for c, cell in enumerate(mesh.cells):
        entry: List[int] = [len(cell)]
        for f, s in zip(cell.index, cell.sign):
            loop = mesh.face_loops[int(f)]
            loop = loop if s > 0 else loop[::-1]
            entry.append(len(loop))
            entry.extend(int(v) for v in loop)
        records.append(entry)
    out: List[str] = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {mesh.n_vertices} double")
    out.extend(" ".join(repr(float(x)) for x in row) for row in mesh.vertices)
    out.append(f"CELLS {mesh.n_cells} {sum(len(r) + 1 for r in records)}")
    out.extend(f"{len(r)} " + " ".join(str(v) for v in r) for r in records)
    out.append(f"CELL_TYPES {mesh.n_cells}")
    out.extend([str(VTK_POLYHEDRON)] * mesh.n_cells)
    out.append(f"CELL_DATA {mesh.n_cells}")
    out.append("SCALARS subdomain int 1")
    out.append("LOOKUP_TABLE default")
    out.extend(str(int(s)) for s in mesh.subdomain)
    for name, values in (cell_scalars or {}).items():
        out.append(f"SCALARS {name} double 1")
        out.append("LOOKUP_TABLE default")
        out.extend(repr(float(v)) for v in np.asarray(values).reshape(-1))
    for name, values in (cell_vectors or {}).items():
        out.append(f"VECTORS {name} double")
        out.extend(" ".join(repr(float(x)) for x in row) for row in np.asarray(values).reshape(-1, 3))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def _resolve_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        if fmt not in FORMATS:
            raise ConfigError(f"unknown mesh format {fmt!r}; expected one of {FORMATS}")
        return fmt
    return "vtk-polyhedral" if path.suffix.lower() == ".vtk" else "native-json"


def load_mesh(path: Union[str, Path], format: Optional[str] = None, check: bool = True) -> PolyMesh:
    """Read a mesh; with ``check`` the first invariant violation raises :class:`TopologyError`."""

    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: file not found")
    fmt = _resolve_format(path, format)
    mesh = _load_json(path) if fmt == "native-json" else _read_vtk(path)
    if check:
        validate(mesh).raise_if_invalid()
    logger.info("loaded %s mesh from %s: %s", fmt, path, mesh.summary())
    return mesh


def save_mesh(mesh: PolyMesh, path: Union[str, Path], format: Optional[str] = None) -> Path:
    path = Path(path)
    fmt = _resolve_format(path, format)
    if fmt == "vtk-polyhedral":
        return write_vtk_polyhedra(mesh, path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(mesh_to_document(mesh)), encoding="utf-8")
    return path


__all__ = [
    "MeshFile",
    "SCHEMA_VERSION",
    "load_mesh",
    "save_mesh",
    "mesh_to_document",
    "mesh_from_document",
    "write_vtk_polyhedra",
]
