"""Exception hierarchy; every failure the CLI can report maps to one class here."""

from __future__ import annotations

from typing import Any, Dict, Optional


class VEMError(Exception):
    """Base error carrying a stable reason slug and a process exit code."""

    reason = "vem_error"
    exit_code = 1

    def to_payload(self) -> Dict[str, Any]:
        return {"status": "error", "reason": self.reason, "message": str(self)}


class ConfigError(VEMError):
    reason = "invalid_config"
    exit_code = 8


class NotImplementedFormulation(ConfigError):
    reason = "formulation_not_implemented"


class ParseError(VEMError):
    reason = "parse_error"
    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.line = line
        self.column = column
        location = ""
        if line is not None:
            location = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + location)

    def to_payload(self) -> Dict[str, Any]:
        payload = super().to_payload()
        payload.update({"line": self.line, "column": self.column})
        return payload


class TopologyError(VEMError):
    reason = "topology_violation"
    exit_code = 3

    def __init__(self, message: str, code: str = "topology") -> None:
        self.code = code
        super().__init__(message)

    def to_payload(self) -> Dict[str, Any]:
        payload = super().to_payload()
        payload["violation"] = self.code
        return payload


class GeometryError(VEMError):
    reason = "degenerate_geometry"
    exit_code = 4


class PerturbationRejected(GeometryError):
    reason = "perturbation_rejected"


class InvalidPolygon2D(GeometryError):
    reason = "invalid_polygon_2d"


class NonPlanarFace(GeometryError):
    reason = "non_planar_face"


class DegenerateFace(GeometryError):
    reason = "degenerate_face"


class DegenerateCell(GeometryError):
    reason = "degenerate_cell"


class LocalFormError(VEMError):
    exit_code = 5


class NotSPD(LocalFormError):
    reason = "not_spd"


class NonPositivePermeability(LocalFormError):
    reason = "non_positive_permeability"


class EmptyInterior(VEMError):
    reason = "empty_interior"
    exit_code = 6


class SolverError(VEMError):
    exit_code = 7


class SolverBreakdown(SolverError):
    reason = "solver_breakdown"


class ToleranceNotReached(SolverError):
    reason = "tolerance_not_reached"


class AcceptanceFailure(VEMError):
    reason = "acceptance_failure"
    exit_code = 10


__all__ = [
    "VEMError",
    "ConfigError",
    "NotImplementedFormulation",
    "ParseError",
    "TopologyError",
    "GeometryError",
    "PerturbationRejected",
    "InvalidPolygon2D",
    "NonPlanarFace",
    "DegenerateFace",
    "DegenerateCell",
    "LocalFormError",
    "NotSPD",
    "NonPositivePermeability",
    "EmptyInterior",
    "SolverError",
    "SolverBreakdown",
    "ToleranceNotReached",
    "AcceptanceFailure",
]
