from __future__ import annotations

import numpy as np
import pytest

from polyvem.config import VEMConfig
from polyvem.errors import ConfigError, EmptyInterior, NotImplementedFormulation
from polyvem.mesh import generate_annulus
from polyvem.spaces import curl_op, div_op
from polyvem.system import (
    CaseSpec,
    assemble,
    backward_error,
    interpolate_case_current,
    interpolate_current,
    interpolate_current_from_potential,
    interpolate_field,
    solve,
)
from polyvem.verify import case_test1, case_test2, cell_averages


def test_constant_field_interpolant(perturbed3):
    h0 = np.array([1.0, -2.0, 0.5])
    values = interpolate_field(lambda p, s=None: np.tile(h0, (len(p), 1)), perturbed3).values
    np.testing.assert_allclose(values, perturbed3.edge_vectors @ h0, atol=1e-13)


def test_curl_of_rotation_interpolant_matches_flux(perturbed3):
    b = np.array([0.4, -1.0, 2.0])
    edge = interpolate_field(lambda p, s=None: np.cross(b, p), perturbed3).values
    flux = interpolate_current(lambda p, s=None: np.tile(2.0 * b, (len(p), 1)), perturbed3).values
    np.testing.assert_allclose(curl_op(perturbed3) @ edge, flux, atol=1e-12)


def test_potential_current_is_discretely_divergence_free(perturbed3):
    case = case_test1()
    current = interpolate_current_from_potential(case.exact_H, perturbed3)
    np.testing.assert_allclose(div_op(perturbed3) @ current.values, 0.0, atol=1e-13)


def test_flux_quadrature_agrees_with_potential_current(grid3):
    case = case_test1()
    by_flux = interpolate_current(case.current, grid3).values
    by_potential = interpolate_case_current(case, grid3).values
    scale = np.abs(by_flux).max()
    np.testing.assert_allclose(by_potential, by_flux, atol=1e-6 * scale)


def test_dirichlet_on_single_cell_has_no_interior(cube, zero_case):
    with pytest.raises(EmptyInterior):
        assemble(zero_case("dirichlet"), cube)


def test_dirichlet_system_dimension_and_symmetry(grid3):
    system = assemble(case_test1(), grid3)
    assert system.n_unknowns == 36 + 8
    assert abs(system.matrix - system.matrix.T).max() < 1e-12
    bounds = system.spectral_bounds()
    assert 0.0 < bounds["edge_min"] <= bounds["edge_max"]
    assert 0.0 < bounds["face_min"] <= bounds["face_max"]


def test_neumann_system_is_bordered(grid2, zero_case):
    system = assemble(zero_case("neumann"), grid2)
    assert system.anchored
    assert system.n_unknowns == grid2.n_edges + grid2.n_vertices + 1


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_zero_current_gives_zero_solution(grid2, zero_case, bc):
    H, p, stats = solve(assemble(zero_case(bc), grid2))
    assert H.max_abs() == 0.0
    assert p.max_abs() == 0.0
    assert stats.residual == 0.0


def test_smooth_case_satisfies_discrete_equations(grid3):
    system = assemble(case_test1(), grid3)
    H, p, stats = solve(system)
    assert stats.curl_residual < 1e-8
    assert stats.p_inf < 1e-8
    assert stats.residual <= VEMConfig.SOLVER_TOL
    boundary = np.flatnonzero(system.layout.boundary_edge)
    np.testing.assert_array_equal(H.values[boundary], system.lifted[boundary])
    assert backward_error(system.matrix, np.zeros(system.n_unknowns), system.rhs) == pytest.approx(1.0)


def test_minres_matches_direct(grid3):
    system = assemble(case_test1(), grid3)
    H_direct, _, _ = solve(system, solver="direct")
    H_iter, _, stats = solve(system, solver="minres", tol=1e-8)
    assert stats.solver == "minres"
    assert stats.iterations > 0
    scale = H_direct.max_abs()
    np.testing.assert_allclose(H_iter.values, H_direct.values, atol=1e-5 * scale)


def test_unknown_solver_is_config_error(grid2, zero_case):
    with pytest.raises(ConfigError):
        solve(assemble(zero_case("dirichlet"), grid2), solver="cholesky")


def test_reserved_formulation_not_implemented(grid2, zero_case, monkeypatch):
    monkeypatch.setattr(VEMConfig, "FORMULATION", "grad-augmented")
    with pytest.raises(NotImplementedFormulation) as info:
        assemble(zero_case("dirichlet"), grid2)
    assert info.value.exit_code == 8


def test_missing_permeability_is_config_error(grid2):
    case = CaseSpec(name="broken", mu={1: 1.0}, current=case_test2().current, bc="neumann")
    with pytest.raises(ConfigError):
        assemble(case, grid2)


def test_parallel_assembly_matches_serial(perturbed3):
    case = case_test1()
    serial = assemble(case, perturbed3, threads=1)
    threaded = assemble(case, perturbed3, threads=3)
    assert abs(serial.matrix - threaded.matrix).max() < 1e-14
    np.testing.assert_allclose(serial.rhs, threaded.rhs, atol=1e-14)


def test_coaxial_gauge_multiplier_vanishes():
    mesh = generate_annulus(1)
    system = assemble(case_test2(), mesh)
    H, p, stats = solve(system)
    assert stats.curl_residual < 1e-6
    assert stats.p_inf <= 1e-6 * H.max_abs()


def test_constant_field_is_reproduced_cell_by_cell(perturbed3):
    h0 = np.array([0.6, -1.3, 0.25])

    def constant(points, subdomain=None):
        return np.tile(h0, (len(np.atleast_2d(points)), 1))

    def zero(points, subdomain=None):
        return np.zeros((len(np.atleast_2d(points)), 3))

    case = CaseSpec(name="patch", mu={0: 2.5}, current=zero, exact_H=constant, bc="dirichlet", lift_boundary=True)
    H, p, stats = solve(assemble(case, perturbed3))
    np.testing.assert_allclose(H.values, interpolate_field(constant, perturbed3).values, atol=1e-10)
    np.testing.assert_allclose(cell_averages(H, perturbed3), np.tile(h0, (perturbed3.n_cells, 1)), atol=1e-10)
    assert p.max_abs() < 1e-10
