"""Polyhedral meshes: data structure, generators, persistence and validation."""

from .core import CellGeometry, FaceGeometry, PolyMesh, SignedIndex, from_cell_loops
from .generators import (
    PolygonMesh2D,
    disk_mesh_2d,
    generate_annulus,
    generate_electromagnet,
    generate_extruded,
    generate_extruded_hexagon,
    generate_perturbed_hex,
    generate_structured_hex,
    parse_mesh_descriptor,
    regular_polygon_2d,
    unit_square_2d,
)
from .io import load_mesh, save_mesh
from .validate import ValidationReport, Violation, validate

__all__ = [
    "PolyMesh",
    "SignedIndex",
    "FaceGeometry",
    "CellGeometry",
    "from_cell_loops",
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
    "parse_mesh_descriptor",
    "load_mesh",
    "save_mesh",
    "validate",
    "ValidationReport",
    "Violation",
]
