from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wallid.exceptions import ConfigError, CoverageError, DivergenceError, DomainError
from wallid.heat_solver import (BoundarySeries, SpaceGrid, WallProblem, df_coefficients, df_step,
                                half_point_conductivity, nodal_capacity, sample_at_sensors,
                                sensor_gradient, simulate, steady_state_init)
from wallid.wall_model import PIECEWISE, QUADRATIC, CapacityModel, ConductivityModel

IFACES = (0.4, 0.96, 1.0)


def constant_problem(uL, uR, dx=0.01, dt=0.01, fourier=0.01575, capacity=(1.0, 1.75, 1.375)):
    t = np.array([0.0, 5000.0])
    bounds = BoundarySeries(t, np.full(2, uL), np.full(2, uR))
    ifaces = IFACES if len(capacity) == 3 else (1.0,)
    return WallProblem(CapacityModel(capacity, ifaces), fourier, bounds, SpaceGrid.from_dx(dx), dt)


def test_space_grid():
    g = SpaceGrid.from_dx(0.01)
    assert g.n_nodes == 101
    assert g.dx == pytest.approx(0.01)
    np.testing.assert_allclose(g.midpoints[:2], [0.005, 0.015])
    with pytest.raises(ConfigError):
        SpaceGrid.from_dx(0.03)


def test_constant_boundaries_keep_constant_field():
    pb = constant_problem(0.3, 0.3)
    m = ConductivityModel(PIECEWISE, (1.0, 1.3, 0.46), IFACES)
    g = simulate(pb, m, 0.0, 100.0)  # 10^4 steps
    assert g.t_star[-1] == pytest.approx(100.0)
    np.testing.assert_allclose(g.u, 0.3, atol=1e-14)


def test_periodic_amplitude_matches_slab_solution():
    # u_L = sin(w t), u_R = 0 on a homogeneous slab: the periodic regime is
    # Im[exp(i w t) sinh(b (1 - x)) / sinh(b)] with b = sqrt(i w / Fo)
    fourier, w = 0.01575, 2 * np.pi / 24.0
    t = np.arange(0.0, 241.0, 0.05)
    b = BoundarySeries(t, np.sin(w * t), np.zeros_like(t))
    pb = WallProblem(CapacityModel((1.0,)), fourier, b, SpaceGrid(101))
    g = simulate(pb, ConductivityModel(PIECEWISE, (1.0,), (1.0,)), 0.0, 240.0, cadence=0.1)
    last = g.u[g.t_star >= 216.0 - 1e-9]
    amp = 0.5 * (last.max(axis=0) - last.min(axis=0))
    beta = np.sqrt(1j * w / fourier)
    exact = np.abs(np.sinh(beta * (1 - g.x_star)) / np.sinh(beta))
    assert np.all(np.diff(amp) < 0)
    np.testing.assert_allclose(amp, exact, atol=2e-3)


def test_steady_profile_matches_series_resistance():
    # flux continuity: u drops across each layer in proportion to thickness / k
    m = ConductivityModel(PIECEWISE, (1.0, 2.0, 0.5), IFACES)
    u = steady_state_init(m, None, 1.0, 0.0, SpaceGrid(101))
    R = np.array([0.4 / 1.0, 0.56 / 2.0, 0.04 / 0.5])
    q = 1.0 / R.sum()
    x = np.linspace(0, 1, 101)
    expected = np.where(x <= 0.4, 1 - q * x,
                        np.where(x <= 0.96, 1 - q * R[0] - q * (x - 0.4) / 2.0,
                                 q * (1 - x) / 0.5))
    np.testing.assert_allclose(u, expected, atol=1e-12)


def test_steady_state_is_stationary_under_the_march():
    pb = constant_problem(1.0, 0.0)
    m = ConductivityModel(PIECEWISE, (1.0, 2.0, 0.5), IFACES)
    g = simulate(pb, m, 0.0, 100.0)
    np.testing.assert_allclose(g.u[-1], g.u[0], atol=1e-12)


def test_relaxes_to_steady_state_from_uniform_start():
    pb = constant_problem(1.0, 0.0, dx=0.02, dt=0.05)
    m = ConductivityModel(PIECEWISE, (1.0, 2.0, 0.5), IFACES)
    g = simulate(pb, m, 0.0, 1500.0, cadence=None, initial=np.zeros(51))
    target = steady_state_init(m, None, 1.0, 0.0, pb.space)
    np.testing.assert_allclose(g.u[-1], target, atol=1e-4)


@pytest.mark.parametrize("levels", [(0.02, 0.01, 0.005)])
def test_manufactured_solution_second_order(levels):
    # u = exp(-Fo pi^2 t) sin(pi x) on a homogeneous wall; dt / dx held fixed
    fourier = 0.01575
    errs = []
    for dx in levels:
        pb = constant_problem(0.0, 0.0, dx=dx, dt=0.01 * dx, fourier=fourier, capacity=(1.0,))
        m = ConductivityModel(PIECEWISE, (1.0,), (1.0,))
        x = pb.space.x
        g = simulate(pb, m, 0.0, 20.0, cadence=None, initial=np.sin(np.pi * x))
        exact = np.exp(-fourier * np.pi**2 * g.t_star[-1]) * np.sin(np.pi * x)
        errs.append(np.max(np.abs(g.u[-1] - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.8), orders


def test_df_step_matches_kernel():
    pb = constant_problem(0.7, 0.1)
    m = ConductivityModel(QUADRATIC, (0.8, 1.6, -1.36), IFACES)
    rng = np.random.default_rng(3)
    u0 = rng.uniform(0, 1, 101)
    u0[0], u0[-1] = 0.7, 0.1
    g = simulate(pb, m, 0.0, 0.05, cadence=None, initial=u0)
    co = pb.coefficients(m)
    # first level is forward Euler: a DF step with u_prev = u_curr and halved lambdas
    from wallid.heat_solver import DFCoefficients
    half = DFCoefficients(co.lam1 / 2, co.lam2 / 2, co.lam3 / 2)
    euler = u0.copy()
    euler[1:-1] = u0[1:-1] + half.lam1[1:-1] * (u0[2:] - u0[1:-1]) - half.lam2[1:-1] * (u0[1:-1] - u0[:-2])
    np.testing.assert_allclose(g.u[1], euler, atol=1e-14)
    u2 = df_step(g.u[0], g.u[1], co, 0.7, 0.1)
    np.testing.assert_allclose(g.u[2], u2, atol=1e-14)


def _random_problem(seed, dt):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 100, 11)
    bl, br = rng.uniform(-1, 1, 11), rng.uniform(-1, 1, 11)
    pb = WallProblem(CapacityModel((1.0, 1.75, 1.375), IFACES), 0.01575, BoundarySeries(t, bl, br),
                     SpaceGrid(51), dt)
    m = ConductivityModel(PIECEWISE, tuple(rng.uniform(0.2, 3.0, 3)), IFACES)
    u0 = rng.uniform(-1, 1, 51)
    bound = max(np.abs(u0).max(), np.abs(bl).max(), np.abs(br).max())
    return pb, m, u0, bound


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_maximum_principle_when_coefficients_nonnegative(seed):
    # with lambda_3 <= 1 every update is a convex combination of old values
    pb, m, u0, bound = _random_problem(seed, 0.002)
    assert np.max(pb.coefficients(m).lam3) <= 1.0
    g = simulate(pb, m, 0.0, 50.0, cadence=None, initial=u0)
    assert np.abs(g.u).max() <= bound + 1e-12


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), dt=st.sampled_from([0.5, 5.0]))
def test_large_steps_do_not_grow(seed, dt):
    # lambda_3 >> 1 with zero forcing: the forward-Euler start may overshoot,
    # but the three-level march itself never amplifies afterwards
    rng = np.random.default_rng(seed)
    t = np.array([0.0, 1e5])
    pb = WallProblem(CapacityModel((1.0, 1.75, 1.375), IFACES), 0.01575,
                     BoundarySeries(t, np.zeros(2), np.zeros(2)), SpaceGrid(51), dt)
    m = ConductivityModel(PIECEWISE, tuple(rng.uniform(0.2, 3.0, 3)), IFACES)
    assert np.max(pb.coefficients(m).lam3) > 10
    g = simulate(pb, m, 0.0, 2000 * dt, cadence=None, initial=np.sin(np.pi * pb.space.x))
    amp = np.abs(g.u).max(axis=1)
    assert amp[-200:].max() <= amp[10:200].max()


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_large_steps_with_rough_forcing_stay_finite(seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 10000, 1001)
    bl, br = rng.uniform(-1, 1, 1001), rng.uniform(-1, 1, 1001)
    pb = WallProblem(CapacityModel((1.0, 1.75, 1.375), IFACES), 0.01575, BoundarySeries(t, bl, br),
                     SpaceGrid(51), 5.0)
    m = ConductivityModel(PIECEWISE, tuple(rng.uniform(0.2, 3.0, 3)), IFACES)
    g = simulate(pb, m, 0.0, 10000.0, cadence=None)  # raises if |u| passes the guard
    assert np.all(np.isfinite(g.u))


def test_divergence_is_reported():
    pb = constant_problem(1.0, 0.0)
    pb = WallProblem(pb.capacity, pb.fourier, pb.boundary, pb.space, pb.dt_star, blowup=0.5)
    m = ConductivityModel(PIECEWISE, (1.0, 1.0, 1.0), IFACES)
    with pytest.raises(DivergenceError):
        simulate(pb, m, 0.0, 1.0, initial=np.zeros(101))


def test_coverage_and_cadence_errors():
    pb = constant_problem(0.0, 0.0)
    m = ConductivityModel(PIECEWISE, (1.0, 1.0, 1.0), IFACES)
    with pytest.raises(CoverageError):
        simulate(pb, m, 0.0, 6000.0)
    with pytest.raises(ConfigError):
        simulate(pb, m, 0.0, 1.0, cadence=0.001)
    with pytest.raises(ConfigError):
        simulate(pb, m, 0.0, 1.0, cadence=0.015)


def test_sampling_and_gradient():
    pb = constant_problem(1.0, 0.0)
    m = ConductivityModel(PIECEWISE, (1.0, 1.0, 1.0), IFACES)
    g = simulate(pb, m, 0.0, 2.0)
    np.testing.assert_allclose(sample_at_sensors(g, [0.0, 0.25, 0.505, 1.0])[0], [1.0, 0.75, 0.495, 0.0],
                               atol=1e-12)
    np.testing.assert_allclose(sensor_gradient(g, [0.1, 0.5]), -1.0, atol=1e-10)
    with pytest.raises(DomainError):
        sample_at_sensors(g, [1.2])
    # 0.23 m in a 0.5 m wall on 101 nodes sits on node 46
    assert sample_at_sensors(g, [0.23 / 0.5])[0, 0] == g.u[0, 46]


def test_nodal_capacity_averages_half_cells():
    c = nodal_capacity(CapacityModel((1.0, 2.0), (0.5, 1.0)), SpaceGrid(11))
    assert c[5] == pytest.approx(1.5)
    assert c[4] == 1.0 and c[6] == 2.0


def test_boundary_interpolation_and_validation():
    b = BoundarySeries.from_celsius(np.array([0.0, 1.0, 2.0]), np.array([0.0, 10.0, 0.0]),
                                    np.array([20.0, 20.0, 20.0]),
                                    __import__("wallid").ReferenceScales(0.5, 0.0, 20.0, 3600.0, 1.0, 1.0))
    left, right = b.interpolate([0.5, 1.5])
    np.testing.assert_allclose(left, [0.25, 0.25])
    np.testing.assert_allclose(right, [1.0, 1.0])
    with pytest.raises(ConfigError):
        BoundarySeries(np.array([0.0, 0.0]), np.zeros(2), np.zeros(2))


def test_df_coefficients_shapes():
    co = df_coefficients(np.ones(4), np.ones(5), 1.0, 0.25, 0.1)
    assert co.lam1[-1] == 0 and co.lam2[0] == 0
    assert co.lam3[2] == pytest.approx(0.1 * 2 / 0.0625)
    with pytest.raises(ConfigError):
        df_coefficients(np.ones(5), np.ones(5), 1.0, 0.25, 0.1)


def test_half_point_conductivity_uses_midpoints():
    m = ConductivityModel(QUADRATIC, (1.0, 1.0, 0.0), (1.0,))
    np.testing.assert_allclose(half_point_conductivity(m, SpaceGrid(3)), [1.25, 1.75])
