from __future__ import annotations

from math import factorial

import numpy as np
import pytest

from polyvem.errors import NonPlanarFace
from polyvem.mesh import from_cell_loops
from polyvem.quadrature import (
    MonomialBasis,
    Polynomial,
    cell_basis,
    cell_moments,
    cell_rule,
    check_planar,
    face_rule,
    gauss_segment,
    integrate_cell,
    integrate_cell_sampled,
    integrate_edge,
    integrate_face,
    tetrahedron_rule,
    triangle_rule,
)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_gauss_segment_exact_to_degree(n):
    s, w = gauss_segment(n)
    assert w.sum() == pytest.approx(1.0)
    for k in range(2 * n):
        assert w @ s**k == pytest.approx(1.0 / (k + 1))


@pytest.mark.parametrize("degree", [1, 2, 4, 6])
def test_triangle_rule_integrates_monomials(degree):
    bary, w = triangle_rule(degree)
    assert w.sum() == pytest.approx(1.0)
    x, y = bary[:, 1], bary[:, 2]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            assert 0.5 * (w @ (x**a * y**b)) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("degree", [2, 6])
def test_tetrahedron_rule_integrates_monomials(degree):
    bary, w = tetrahedron_rule(degree)
    assert w.sum() == pytest.approx(1.0)
    x, y, z = bary[:, 1], bary[:, 2], bary[:, 3]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            for c in range(degree + 1 - a - b):
                exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
                assert (w @ (x**a * y**b * z**c)) / 6.0 == pytest.approx(exact, rel=1e-12)


def test_monomial_basis_layout():
    basis = MonomialBasis(center=np.zeros(3), h=2.0, degree=2)
    assert len(basis) == 10
    assert basis.exponents[0] == (0, 0, 0)
    assert basis.exponents[1:4] == ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    assert len(MonomialBasis(center=np.zeros(2), h=1.0, degree=1)) == 3
    values = basis.evaluate(np.array([[2.0, 4.0, -2.0]]))
    np.testing.assert_allclose(values[0, :4], [1.0, 1.0, 2.0, -1.0])


def test_edge_and_face_integrals_on_cube(cube):
    for e in range(cube.n_edges):
        assert integrate_edge(cube, e, lambda p: np.ones(len(p))) == pytest.approx(1.0)
    bottom = int(np.argmin(cube.face_barycenters[:, 2]))
    assert integrate_face(cube, bottom, lambda p: p[:, 0] ** 2, degree=2) == pytest.approx(1.0 / 3.0)
    points, weights = face_rule(cube, bottom, 6)
    assert weights.sum() == pytest.approx(1.0)
    assert np.all(weights > 0.0)


def test_cell_moments_on_unit_cube(cube):
    basis = cell_basis(cube, 0, degree=2)
    moments = cell_moments(cube, 0, basis)
    lookup = {e: i for i, e in enumerate(basis.exponents)}
    assert moments[lookup[(0, 0, 0)]] == pytest.approx(1.0)
    assert moments[lookup[(1, 0, 0)]] == pytest.approx(0.0, abs=1e-15)
    assert moments[lookup[(2, 0, 0)]] == pytest.approx(1.0 / 36.0)
    assert moments[lookup[(1, 1, 0)]] == pytest.approx(0.0, abs=1e-15)


def test_cell_rule_degree_six(cube):
    points, weights = cell_rule(cube, 0, 6)
    assert weights.sum() == pytest.approx(1.0)
    assert weights @ points[:, 0] ** 6 == pytest.approx(1.0 / 7.0, rel=1e-12)
    assert integrate_cell_sampled(cube, 0, lambda p: p[:, 0] * p[:, 1] ** 2 * p[:, 2] ** 3) == pytest.approx(
        1.0 / 24.0, rel=1e-12
    )


def test_moment_reduction_matches_sampling_on_distorted_cells(perturbed3):
    rng = np.random.default_rng(5)
    for c in range(perturbed3.n_cells):
        basis = cell_basis(perturbed3, c, degree=2)
        poly = Polynomial(basis, rng.normal(size=len(basis)))
        points, weights = cell_rule(perturbed3, c, 2)
        assert weights.sum() == pytest.approx(perturbed3.cell_volumes[c], rel=1e-12)
        assert integrate_cell(perturbed3, c, poly) == pytest.approx(weights @ poly(points), rel=1e-10, abs=1e-14)


def test_non_planar_face_detected():
    vertices = np.array(
        [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1.2], [0, 1, 1]], dtype=float
    )
    loops = [
        [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)],
    ]
    mesh = from_cell_loops(vertices, loops)
    f = int(np.argmax(mesh.face_planarity))
    with pytest.raises(NonPlanarFace):
        check_planar(mesh, f)
    with pytest.raises(NonPlanarFace):
        integrate_face(mesh, f, lambda p: np.ones(len(p)))
