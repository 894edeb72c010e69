import numpy as np
import pytest

from tdnh.model import (
    ScenarioConstants,
    build_hermitian_map_scenario,
    build_nonhermitian_map_scenario,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


@pytest.fixture(scope="session")
def hermitian_scenario():
    """Constant drive, broken at the static level (discriminant -3 - y_im^2)."""
    return build_hermitian_map_scenario(
        1.0, 0.0, 2.0, ScenarioConstants(c1=2.0, c2=1.0, omega=0.5)
    )


@pytest.fixture(scope="session")
def hermitian_loop_scenario():
    """Closed drive loop around the origin of the (x_re, y_re) plane."""
    return build_hermitian_map_scenario(
        "cos(2*pi*t)",
        "sin(2*pi*t)",
        "1.2*sin(2*pi*t)",
        ScenarioConstants(c1=2.0, c2=1.0, omega=0.3),
        validate_at=(0.05, 0.3, 0.65, 0.95),
    )


@pytest.fixture(scope="session")
def nonhermitian_scenario():
    """Periodically driven non-Hermitian map."""
    return build_nonhermitian_map_scenario(
        "1.5+0.4*sin(2*pi*t)",
        "1+0.3*cos(2*pi*t)",
        "0.7+0.2*sin(4*pi*t)",
        ScenarioConstants(c1=0.8, omega=0.4),
    )


@pytest.fixture(scope="session")
def nonhermitian_constant_scenario():
    return build_nonhermitian_map_scenario(
        1.0, 1.0, 1.0, ScenarioConstants(c1=0.5, omega=0.0)
    )
