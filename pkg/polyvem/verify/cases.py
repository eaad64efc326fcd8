"""
cases.py — модельні задачі: гладкий розв'язок у кубі, коаксіальний провідник, електромагніт
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from ..errors import ConfigError
from ..mesh.core import PolyMesh
from ..mesh.generators import ANNULUS_NAMES, ANNULUS_RADII, ELECTROMAGNET_NAMES
from ..system import CaseSpec

MU0 = 4.0e-7 * math.pi

# -- smooth field on the unit cube ----------------------------------------------


def _test1_field(points: np.ndarray, subdomain: Optional[int] = None) -> np.ndarray:
    sx, sy, sz = np.sin(np.pi * np.atleast_2d(points)).T
    return np.column_stack([sy - sz, sz - sx, sx - sy]) / np.pi


def _test1_curl(points: np.ndarray, subdomain: Optional[int] = None) -> np.ndarray:
    cx, cy, cz = np.cos(np.pi * np.atleast_2d(points)).T
    return -np.column_stack([cy + cz, cz + cx, cx + cy])


def case_test1() -> CaseSpec:
    return CaseSpec(
        name="test1",
        mu={0: 1.0},
        current=_test1_curl,
        exact_H=_test1_field,
        bc="dirichlet",
        lift_boundary=True,
        subdomain_names={0: "domain"},
        mesh_family="structured",
        description="H = (sin πy - sin πz, sin πz - sin πx, sin πx - sin πy)/π on the unit cube, tangential trace imposed",
    )


# -- coaxial conductor --------------------------------------------------------------

COAX_CURRENT = 70000.0
COAX_MU = {0: 1.0, 1: 1000.0, 2: 1.0}


def _azimuthal(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    return np.column_stack([-points[:, 1], points[:, 0], np.zeros(len(points))])


def _coax_field(points: np.ndarray, subdomain: Optional[int] = None) -> np.ndarray:
    """H = k(r) (-y, x, 0) with the piecewise k of the two opposite currents."""

    a, b, c = ANNULUS_RADII
    current = COAX_CURRENT
    r2 = np.maximum(np.sum(np.atleast_2d(points)[:, :2] ** 2, axis=1), 1e-300)
    k = np.where(
        r2 <= a * a,
        current / (2.0 * np.pi * a * a),
        np.where(
            r2 <= b * b,
            current / (2.0 * np.pi * r2),
            -current / (2.0 * np.pi * (c * c - b * b))
            + (current / (2.0 * np.pi) + current * b * b / (2.0 * np.pi * (c * c - b * b))) / r2,
        ),
    )
    k = np.where(r2 <= c * c, k, 0.0)
    return k[:, None] * _azimuthal(points)


def _coax_current(points: np.ndarray, subdomain: Optional[int] = None) -> np.ndarray:
    a, b, c = ANNULUS_RADII
    points = np.atleast_2d(points)
    r2 = np.sum(points[:, :2] ** 2, axis=1)
    jz = np.where(
        r2 <= a * a,
        COAX_CURRENT / (np.pi * a * a),
        np.where(r2 <= b * b, 0.0, np.where(r2 <= c * c, -COAX_CURRENT / (np.pi * (c * c - b * b)), 0.0)),
    )
    out = np.zeros((len(points), 3))
    out[:, 2] = jz
    return out


def coax_energies(mesh: PolyMesh) -> Dict[str, float]:
    """Radial integrals of μ|H|² over S1, M, S2 for the mesh's height."""

    a, b, c = ANNULUS_RADII
    height = float(np.ptp(mesh.vertices[:, 2]))
    i2 = COAX_CURRENT**2
    w_s1 = i2 / (8.0 * np.pi)
    w_m = i2 / (2.0 * np.pi) * np.log(b / a)
    w_s2 = i2 / (2.0 * np.pi * (c * c - b * b) ** 2) * (
        c**4 * np.log(c / b) - c * c * (c * c - b * b) + (c**4 - b**4) / 4.0
    )
    raw = {0: w_s1, 1: w_m, 2: w_s2}
    return {ANNULUS_NAMES[k]: float(COAX_MU[k] * height * w) for k, w in raw.items()}


def case_test2() -> CaseSpec:
    return CaseSpec(
        name="test2",
        mu=dict(COAX_MU),
        current=_coax_current,
        exact_H=_coax_field,
        bc="neumann",
        subdomain_names=dict(ANNULUS_NAMES),
        mesh_family="annulus",
        analytic_energies=coax_energies,
        description="opposite currents of 70000 A in S1 and S2 separated by a μ=1000 shell, natural boundary",
    )


# -- cylindrical electromagnet --------------------------------------------------------

COIL_INNER, COIL_OUTER, COIL_HALF_HEIGHT = 0.35, 0.55, 0.25
COIL_SECTION = (COIL_OUTER - COIL_INNER) * 2.0 * COIL_HALF_HEIGHT
ELECTROMAGNET_MU = {0: 1.0, 1: 10000.0, 2: 1.0}
ELECTROMAGNET_REFERENCE = {"A": 9.09e-07, "C": 4.73e-10, "T": 3.61e-08}


def _coil_current(points: np.ndarray, subdomain: Optional[int] = None) -> np.ndarray:
    points = np.atleast_2d(points)
    r = np.hypot(points[:, 0], points[:, 1])
    inside = (r >= COIL_INNER) & (r <= COIL_OUTER) & (np.abs(points[:, 2]) <= COIL_HALF_HEIGHT)
    scale = np.where(inside, 1.0 / (COIL_SECTION * np.maximum(r, 1e-300)), 0.0)
    return scale[:, None] * _azimuthal(points)


def _coil_potential(points: np.ndarray, subdomain: Optional[int] = None) -> np.ndarray:
    """T = T_z(r) e_z inside the coil slab, curl T = unit total current along e_θ."""

    points = np.atleast_2d(points)
    r = np.hypot(points[:, 0], points[:, 1])
    tz = (COIL_OUTER - np.clip(r, COIL_INNER, COIL_OUTER)) / COIL_SECTION
    tz = np.where(np.abs(points[:, 2]) <= COIL_HALF_HEIGHT, tz, 0.0)
    out = np.zeros((len(points), 3))
    out[:, 2] = tz
    return out


def case_test3() -> CaseSpec:
    return CaseSpec(
        name="test3",
        mu=dict(ELECTROMAGNET_MU),
        current=_coil_current,
        current_potential=_coil_potential,
        bc="neumann",
        subdomain_names=dict(ELECTROMAGNET_NAMES),
        mesh_family="electromagnet",
        energy_scale=MU0,
        reference_energies=dict(ELECTROMAGNET_REFERENCE),
        description="1 A through a toroidal coil around a μ=10000 core in an air box",
    )


# -- user supplied ------------------------------------------------------------------


class CaseFile(BaseModel):
    """Piecewise-constant data keyed by subdomain label."""

    name: str = "from-file"
    bc: Literal["dirichlet", "neumann"] = "neumann"
    mu: Dict[int, float]
    current: Dict[int, List[float]] = Field(default_factory=dict)
    subdomain_names: Dict[int, str] = Field(default_factory=dict)
    mesh: Optional[str] = None

    @field_validator("mu")
    @classmethod
    def _positive_mu(cls, value: Dict[int, float]) -> Dict[int, float]:
        bad = {k: v for k, v in value.items() if not v > 0.0}
        if bad:
            raise ValueError(f"permeability must be positive, got {bad}")
        return value

    @field_validator("current")
    @classmethod
    def _three_components(cls, value: Dict[int, List[float]]) -> Dict[int, List[float]]:
        for label, vec in value.items():
            if len(vec) != 3:
                raise ValueError(f"current for subdomain {label} must have 3 components")
        return value


def case_from_file(path: Path) -> CaseSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
        raw = yaml.safe_load(text) if path.suffix.lower() in {".yaml", ".yml"} else json.loads(text)
        parsed = CaseFile.model_validate(raw or {})
    except OSError as exc:
        raise ConfigError(f"cannot read case file {path}: {exc}") from exc
    except (yaml.YAMLError, json.JSONDecodeError, ValidationError) as exc:
        raise ConfigError(f"invalid case file {path}: {exc}") from exc

    table = {int(k): np.asarray(v, dtype=float) for k, v in parsed.current.items()}

    def current(points: np.ndarray, subdomain: Optional[int] = None) -> np.ndarray:
        vec = table.get(int(subdomain), np.zeros(3)) if subdomain is not None else np.zeros(3)
        return np.tile(vec, (len(np.atleast_2d(points)), 1))

    return CaseSpec(
        name=parsed.name,
        mu=dict(parsed.mu),
        current=current,
        bc=parsed.bc,
        subdomain_names=dict(parsed.subdomain_names),
        mesh_family=parsed.mesh or "file",
        description=f"piecewise-constant data from {path.name}",
        piecewise_current=True,
    )


def check_current_compatibility(case: CaseSpec, mesh: PolyMesh, rtol: float = 1e-12) -> None:
    """Reject piecewise data that is not divergence-free on ``mesh``.

    j·n must agree on both sides of every interface between subdomains, and
    vanish on the boundary of a Dirichlet problem.
    """

    labels = sorted(set(np.unique(mesh.subdomain).tolist()))
    origin = mesh.face_barycenters[:1] if mesh.n_faces else np.zeros((1, 3))
    scale = max(float(np.abs(case.current(origin, s)).max()) for s in labels) if labels else 0.0
    if scale == 0.0:
        return
    tol = rtol * scale
    for f, refs in enumerate(mesh.face_cells):
        normal = mesh.face_normals[f]
        point = mesh.face_barycenters[f : f + 1]
        if len(refs) == 2:
            s1, s2 = (int(mesh.subdomain[c]) for c, _ in refs)
            if s1 == s2:
                continue
            jump = float((case.current(point, s1) - case.current(point, s2))[0] @ normal)
            if abs(jump) > tol:
                raise ConfigError(
                    f"case {case.name}: normal current jumps by {jump:.3e} across face {f} between "
                    f"subdomains {case.subdomain_name(s1)} and {case.subdomain_name(s2)}; "
                    "the current is not divergence-free"
                )
        elif len(refs) == 1 and case.bc == "dirichlet":
            s = int(mesh.subdomain[refs[0][0]])
            flux = float(case.current(point, s)[0] @ normal)
            if abs(flux) > tol:
                raise ConfigError(
                    f"case {case.name}: current crosses the Dirichlet boundary at face {f} "
                    f"(j·n = {flux:.3e} in subdomain {case.subdomain_name(s)})"
                )


CASES = {"test1": case_test1, "test2": case_test2, "test3": case_test3}


def get_case(name: str, case_file: Optional[Path] = None) -> CaseSpec:
    if name == "from-file":
        if case_file is None:
            raise ConfigError("case 'from-file' needs a case file")
        return case_from_file(case_file)
    try:
        return CASES[name]()
    except KeyError:
        raise ConfigError(f"unknown case {name!r}; expected one of {sorted(CASES) + ['from-file']}") from None


__all__ = [
    "MU0",
    "case_test1",
    "case_test2",
    "case_test3",
    "case_from_file",
    "check_current_compatibility",
    "coax_energies",
    "get_case",
    "CaseFile",
    "CASES",
]
