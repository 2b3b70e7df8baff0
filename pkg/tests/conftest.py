from __future__ import annotations

import numpy as np
import pytest

from wallid.heat_solver import BoundarySeries, SpaceGrid, WallProblem
from wallid.twin import SyntheticTwinSpec, generate_twin
from wallid.wall_model import Layer, ReferenceScales, SensorArray, WallSpec, nondimensionalize

# lines reported by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def wall():
    return WallSpec((Layer(0.20, 1.75, 1.6e6), Layer(0.28, 2.3, 2.8e6), Layer(0.02, 0.8, 2.2e6)))


@pytest.fixture(scope="session")
def sensors():
    return SensorArray((0.05, 0.23, 0.42))


@pytest.fixture(scope="session")
def x_sensors(sensors, wall):
    return np.asarray(sensors.positions) / wall.length


@pytest.fixture(scope="session")
def short_boundary():
    """Ten days of hourly boundary data with a daily cycle, degC."""
    hours = np.arange(0, 241, dtype=float)
    T_out = 5.0 + 6.0 * np.sin(2 * np.pi * hours / 24.0)
    T_in = 20.0 + 0.5 * np.sin(2 * np.pi * (hours - 6) / 24.0)
    return hours, T_out, T_in


@pytest.fixture(scope="session")
def short_problem(wall, short_boundary):
    hours, T_out, T_in = short_boundary
    scales = ReferenceScales.default(wall, np.concatenate([T_out, T_in]))
    piecewise, cmodel, _ = nondimensionalize(wall, scales)
    bounds = BoundarySeries.from_celsius(hours, T_out, T_in, scales)
    return WallProblem(cmodel, scales.fourier, bounds, SpaceGrid(101)), piecewise, scales


@pytest.fixture(scope="session")
def twin0(wall, sensors):
    return generate_twin(SyntheticTwinSpec(seed=0), wall, sensors)


@pytest.fixture(scope="session")
def twin0_problem(twin0, wall):
    twin = twin0
    scales = twin.scales
    piecewise, cmodel, _ = nondimensionalize(wall, scales)
    bounds = BoundarySeries.from_celsius(twin.hours, twin.T_out, twin.T_in, scales)
    return WallProblem(cmodel, scales.fourier, bounds, SpaceGrid(101)), piecewise
