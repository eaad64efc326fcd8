from __future__ import annotations

import numpy as np
import pytest

from polyvem.mesh import from_cell_loops, generate_annulus
from polyvem.spaces import (
    DofLayout,
    ExactSequenceReport,
    EdgeField,
    FaceField,
    curl_op,
    div_op,
    exact_sequence_audit,
    grad_op,
)


@pytest.fixture(scope="module")
def annulus1():
    return generate_annulus(1)


@pytest.mark.parametrize("name", ["cube", "grid2", "perturbed3", "hexagon_prisms", "annulus1"])
def test_incidence_compositions_vanish(name, request):
    mesh = request.getfixturevalue(name)
    G, C, D = grad_op(mesh), curl_op(mesh), div_op(mesh)
    assert G.dtype == np.int64 and C.dtype == np.int64
    assert abs(C @ G).max() == 0
    assert abs(D @ C).max() == 0


def test_audit_on_small_grid(grid2):
    report = exact_sequence_audit(grid2, rank_check=True)
    assert report.ok
    assert report.rank_grad == grid2.n_vertices - 1
    assert report.dim_ker_curl == report.rank_grad
    assert report.n_components == 1
    assert report.local_failures == []
    payload = report.to_dict()
    assert payload["ok"] is True


def test_audit_without_rank_check(annulus1):
    report = exact_sequence_audit(annulus1, rank_check=False)
    assert report.ok
    assert not report.rank_checked
    assert report.euler_failures == []


def test_gradient_of_linear_function_is_edge_interpolant(perturbed3):
    g = np.array([0.3, -1.2, 2.0])
    q = perturbed3.vertices @ g
    moments = grad_op(perturbed3) @ q
    np.testing.assert_allclose(moments, perturbed3.edge_vectors @ g, atol=1e-13)


def test_constant_flux_is_divergence_free(perturbed3):
    j = np.array([1.0, 2.0, -0.5])
    fluxes = perturbed3.face_areas * (perturbed3.face_normals @ j)
    np.testing.assert_allclose(div_op(perturbed3) @ fluxes, 0.0, atol=1e-13)


def test_layout_and_field_lengths(grid3):
    layout = DofLayout.from_mesh(grid3)
    assert layout.total == grid3.n_vertices + grid3.n_edges + grid3.n_faces
    assert layout.offsets["face"] == grid3.n_vertices + grid3.n_edges
    assert layout.interior_edges.size == 36
    assert layout.interior_vertices.size == 8
    field = EdgeField(np.ones(grid3.n_edges), layout)
    assert len(field) == grid3.n_edges
    assert field.max_abs() == 1.0
    with pytest.raises(ValueError):
        FaceField(np.zeros(3), layout)


def _two_separate_cubes():
    unit = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], float)
    loops = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)]
    vertices = np.vstack([unit, unit + [3.0, 0.0, 0.0]])
    return from_cell_loops(vertices, [loops, [tuple(v + 8 for v in loop) for loop in loops]])


def test_audit_rejects_disconnected_mesh():
    report = exact_sequence_audit(_two_separate_cubes(), rank_check=True)
    assert report.curl_grad_zero and report.div_curl_zero
    assert report.n_components == 2
    assert report.rank_grad == 16 - 2
    assert not report.ok
    assert report.to_dict()["ok"] is False


def test_audit_rank_must_match_vertex_count():
    report = ExactSequenceReport(
        curl_grad_zero=True,
        div_curl_zero=True,
        curl_grad_nnz=0,
        div_curl_nnz=0,
        euler_failures=[],
        n_components=1,
        n_vertices=27,
        rank_grad=25,
        dim_ker_curl=25,
        rank_checked=True,
    )
    assert not report.ok
    report.rank_grad = report.dim_ker_curl = 26
    assert report.ok
