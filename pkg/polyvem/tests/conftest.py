from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polyvem.mesh import generate_extruded_hexagon, generate_perturbed_hex, generate_structured_hex
from polyvem.system import CaseSpec

settings.register_profile(
    "polyvem",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("polyvem")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: refinement studies that take tens of seconds")


@pytest.fixture(scope="session")
def cube():
    return generate_structured_hex(1)


@pytest.fixture(scope="session")
def grid2():
    return generate_structured_hex(2)


@pytest.fixture(scope="session")
def grid3():
    return generate_structured_hex(3)


@pytest.fixture(scope="session")
def perturbed3():
    return generate_perturbed_hex(3, amplitude=0.2, seed=7)


@pytest.fixture(scope="session")
def hexagon_prisms():
    return generate_extruded_hexagon(2)


def _zero(points, subdomain=None):
    return np.zeros((len(np.atleast_2d(points)), 3))


@pytest.fixture
def zero_case():
    def build(bc="dirichlet"):
        return CaseSpec(name="zero", mu={0: 1.0}, current=_zero, exact_H=_zero, bc=bc)

    return build
