from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polyvem.config import VEMConfig
from polyvem.errors import ConfigError, InvalidPolygon2D, ParseError, PerturbationRejected, TopologyError
from polyvem.mesh import (
    PolygonMesh2D,
    generate_annulus,
    generate_electromagnet,
    generate_perturbed_hex,
    generate_structured_hex,
    load_mesh,
    parse_mesh_descriptor,
    save_mesh,
    validate,
)
from polyvem.mesh.io import MeshFile, mesh_from_document, mesh_to_document


def test_single_cube_counts_and_geometry(cube):
    assert cube.summary() == {"vertices": 8, "edges": 12, "faces": 6, "cells": 1}
    assert cube.boundary_face.all()
    assert cube.cell_volumes[0] == pytest.approx(1.0)
    np.testing.assert_allclose(cube.cell_barycenters[0], [0.5, 0.5, 0.5], atol=1e-14)
    assert cube.cell_diameters[0] == pytest.approx(np.sqrt(3.0))
    np.testing.assert_allclose(cube.face_areas, 1.0)


def test_outward_normals_of_cube(cube):
    cell = cube.cells[0]
    outward = cell.sign[:, None] * cube.face_normals[cell.index]
    offsets = cube.face_barycenters[cell.index] - cube.cell_barycenters[0]
    assert np.all(np.einsum("ij,ij->i", outward, offsets) > 0.0)


def test_structured_grid_counts(grid2, grid3):
    assert grid2.summary() == {"vertices": 27, "edges": 54, "faces": 36, "cells": 8}
    assert int(grid2.boundary_face.sum()) == 24
    assert int((~grid2.boundary_edges).sum()) == 6
    assert int((~grid2.boundary_vertices).sum()) == 1
    assert int((~grid3.boundary_edges).sum()) == 36
    assert int((~grid3.boundary_vertices).sum()) == 8
    assert grid3.cell_volumes.sum() == pytest.approx(1.0)


def test_validate_reports_metrics(grid2):
    report = validate(grid2)
    assert report.ok
    assert len(report.cell_metrics) == 8
    assert (report.cell_metrics["star_ratio"] > 0.0).all()
    summary = report.summary()
    assert summary["status"] == "ok"
    assert summary["metrics"]["h_max"] == pytest.approx(np.sqrt(3.0) / 2.0)


def test_perturbed_mesh_is_valid_and_planar(perturbed3):
    report = validate(perturbed3)
    assert report.ok, report.first_violation()
    assert np.all(perturbed3.face_planarity <= VEMConfig.PLANARITY_TOL * perturbed3.face_diameters)
    assert perturbed3.cell_volumes.sum() == pytest.approx(1.0, rel=1e-12)
    structured = generate_structured_hex(3)
    assert not np.allclose(perturbed3.vertices, structured.vertices)


def test_perturbed_mesh_is_reproducible():
    a = generate_perturbed_hex(3, amplitude=0.2, seed=11)
    b = generate_perturbed_hex(3, amplitude=0.2, seed=11)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    assert a.summary() == b.summary()


def test_zero_amplitude_gives_structured_mesh():
    assert generate_perturbed_hex(2, amplitude=0.0).summary() == generate_structured_hex(2).summary()


def test_large_perturbation_rejected_unless_clamped(monkeypatch):
    with pytest.raises(PerturbationRejected):
        generate_perturbed_hex(2, amplitude=0.5)
    with pytest.raises(PerturbationRejected):
        generate_perturbed_hex(2, amplitude=-0.1)
    monkeypatch.setattr(VEMConfig, "CLAMP_PERTURBATION", True)
    mesh = generate_perturbed_hex(2, amplitude=0.5, seed=3)
    assert validate(mesh).ok


@given(seed=st.integers(min_value=0, max_value=10_000), amplitude=st.floats(min_value=0.0, max_value=0.3))
def test_perturbed_family_stays_valid(seed, amplitude):
    mesh = generate_perturbed_hex(2, amplitude=amplitude, seed=seed)
    assert validate(mesh).ok
    assert np.all(mesh.cell_volumes > 0.0)
    assert mesh.cell_volumes.sum() == pytest.approx(1.0, rel=1e-10)


def test_extruded_hexagon(hexagon_prisms):
    assert hexagon_prisms.n_cells == 2
    assert all(len(cell) == 8 for cell in hexagon_prisms.cells)
    assert validate(hexagon_prisms).ok
    assert hexagon_prisms.cell_volumes.sum() == pytest.approx(1.5 * np.sqrt(3.0))


def test_annulus_labels_and_counts():
    mesh = generate_annulus(1)
    assert validate(mesh).ok
    assert mesh.n_cells == 110
    assert set(np.unique(mesh.subdomain).tolist()) == {0, 1, 2}
    assert mesh.subdomain_names == {0: "S1", 1: "M", 2: "S2"}
    assert float(np.ptp(mesh.vertices[:, 2])) == pytest.approx(0.5)
    tri = generate_annulus(1, triangulated=True)
    assert validate(tri).ok
    assert tri.cell_volumes.sum() == pytest.approx(mesh.cell_volumes.sum())


def test_electromagnet_regions():
    mesh = generate_electromagnet(1)
    assert mesh.n_cells == 215
    assert validate(mesh).ok
    assert set(np.unique(mesh.subdomain).tolist()) == {0, 1, 2}
    core = mesh.cell_barycenters[mesh.subdomain == 1]
    coil = mesh.cell_barycenters[mesh.subdomain == 2]
    assert np.all(np.hypot(core[:, 0], core[:, 1]) < 0.25)
    assert np.all(np.abs(core[:, 2]) < 0.5)
    coil_r = np.hypot(coil[:, 0], coil[:, 1])
    assert np.all((coil_r > 0.35) & (coil_r < 0.55))
    assert np.all(np.abs(coil[:, 2]) < 0.25)


def test_clockwise_polygon_rejected():
    square = PolygonMesh2D(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]), [np.arange(4)])
    with pytest.raises(InvalidPolygon2D):
        square.validate()


def test_flipped_face_sign_is_reported(grid2):
    doc = mesh_to_document(grid2)
    refs = doc["cells"][0]["faces"]
    k = next(i for i, ref in enumerate(refs) if not grid2.boundary_face[abs(ref) - 1])
    refs[k] = -refs[k]
    broken = mesh_from_document(MeshFile.model_validate(doc))
    report = validate(broken)
    assert not report.ok
    assert report.first_violation().code == "orientation"
    with pytest.raises(TopologyError) as info:
        report.raise_if_invalid()
    assert info.value.to_payload()["violation"] == "orientation"


def test_native_json_round_trip(tmp_path, perturbed3):
    path = save_mesh(perturbed3, tmp_path / "mesh.json")
    loaded = load_mesh(path)
    assert loaded.summary() == perturbed3.summary()
    np.testing.assert_allclose(loaded.cell_volumes, perturbed3.cell_volumes, rtol=1e-12)


def test_vtk_polyhedra_round_trip(tmp_path):
    mesh = generate_annulus(1)
    path = save_mesh(mesh, tmp_path / "annulus.vtk")
    loaded = load_mesh(path)
    assert loaded.summary() == mesh.summary()
    np.testing.assert_array_equal(loaded.subdomain, mesh.subdomain)
    np.testing.assert_allclose(loaded.cell_volumes, mesh.cell_volumes, rtol=1e-10)


def test_json_syntax_error_has_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 1,\n "vertices": [1, 2,,]}')
    with pytest.raises(ParseError) as info:
        load_mesh(path)
    assert info.value.line == 2
    assert info.value.to_payload()["reason"] == "parse_error"


def test_schema_violation_is_parse_error(tmp_path):
    path = tmp_path / "bad.json"
    doc = mesh_to_document(generate_structured_hex(1))
    doc["faces"][0]["edges"] = [0, 1, 2]
    path.write_text(json.dumps(doc))
    with pytest.raises(ParseError):
        load_mesh(path)


def test_descriptors():
    assert parse_mesh_descriptor("structured:2").n_cells == 8
    assert parse_mesh_descriptor("hexagon:3").n_cells == 3
    assert parse_mesh_descriptor("extruded:1", family_alias="annulus").n_cells == 110
    with pytest.raises(ConfigError):
        parse_mesh_descriptor("bogus:1")
    with pytest.raises(ConfigError):
        parse_mesh_descriptor("structured:x")


def _l_prism_vtk(path, flipped=()):
    base = [(0, 0), (3, 0), (3, 1), (1, 1), (1, 3), (0, 3)]
    points = [(x, y, 0.0) for x, y in base] + [(x, y, 1.0) for x, y in base]
    loops = [tuple(range(5, -1, -1)), tuple(range(6, 12))]
    loops += [(a, (a + 1) % 6, (a + 1) % 6 + 6, a + 6) for a in range(6)]
    loops = [tuple(reversed(loop)) if k in flipped else loop for k, loop in enumerate(loops)]
    stream = [len(loops)]
    for loop in loops:
        stream += [len(loop), *loop]
    lines = ["# vtk DataFile Version 3.0", "L prism", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(points)} double")
    lines += [f"{x} {y} {z}" for x, y, z in points]
    lines += [f"CELLS 1 {len(stream) + 1}", " ".join(str(v) for v in [len(stream), *stream])]
    lines += ["CELL_TYPES 1", "42"]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.mark.parametrize("flipped", [(), (1, 3, 6), tuple(range(8))])
def test_vtk_non_convex_cell_keeps_its_volume(tmp_path, flipped):
    mesh = load_mesh(_l_prism_vtk(tmp_path / "l_prism.vtk", flipped))
    assert mesh.summary() == {"vertices": 12, "edges": 18, "faces": 8, "cells": 1}
    assert mesh.cell_volumes[0] == pytest.approx(5.0)
    assert validate(mesh).ok


def test_undecodable_mesh_file_is_parse_error(tmp_path):
    for name in ("mesh.json", "mesh.vtk"):
        path = tmp_path / name
        path.write_bytes(b"\xff\xfe\x00garbage")
        with pytest.raises(ParseError):
            load_mesh(path)


def test_vtk_cell_stream_shorter_than_declared(tmp_path):
    path = save_mesh(generate_structured_hex(1), tmp_path / "cube.vtk")
    text = path.read_text()
    path.write_text(text.replace("CELLS 1 ", "CELLS 2 ").replace("CELL_TYPES 1\n42", "CELL_TYPES 2\n42\n42"))
    with pytest.raises(ParseError):
        load_mesh(path)


def test_vtk_truncated_face_stream(tmp_path):
    path = save_mesh(generate_structured_hex(1), tmp_path / "cube.vtk")
    lines = path.read_text().splitlines()
    at = next(k for k, line in enumerate(lines) if line.startswith("CELLS"))
    payload = lines[at + 1].split()
    lines[at] = f"CELLS 1 {len(payload) - 1}"
    lines[at + 1] = " ".join([str(int(payload[0]) - 1)] + payload[1:-1])
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError):
        load_mesh(path)


def test_electromagnet_second_level_stays_small():
    mesh = generate_electromagnet(2)
    assert mesh.n_cells == 2110
    assert validate(mesh).ok
    assert set(np.unique(mesh.subdomain).tolist()) == {0, 1, 2}


def test_project_policy_rejects_bent_faces(monkeypatch):
    monkeypatch.setattr(VEMConfig, "REPLANARIZE_SWEEPS", 0)
    with pytest.raises(PerturbationRejected):
        generate_perturbed_hex(3, amplitude=0.2, seed=5, policy="project")
    split = generate_perturbed_hex(3, amplitude=0.2, seed=5, policy="split")
    assert split.n_faces > generate_structured_hex(3).n_faces
    assert validate(split).ok
