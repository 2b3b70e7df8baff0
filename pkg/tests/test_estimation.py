from __future__ import annotations

import numpy as np
import pytest

from wallid.estimation import (ObservationSet, UncertaintyModel, WindowCost, cost, default_bounds,
                               estimate, propagate_uncertainty, residual_analysis, residual_stats)
from wallid.exceptions import ConfigError, CoverageError
from wallid.heat_solver import BoundarySeries, SpaceGrid, WallProblem, sample_at_sensors, simulate
from wallid.optimize import PENALTY, OptimizerConfig
from wallid.wall_model import (LINEAR, PIECEWISE, QUADRATIC, CapacityModel, ConductivityModel,
                               ReferenceScales, apriori_model, identifiable_mask)

W0, W1 = 120.0, 168.0  # window in t* (= hours)


def synthetic_obs(problem, model, apriori, x_sensors, sigma=0.02, start=0.0, end=240.0):
    g = simulate(problem, model, start, end, init_model=apriori)
    return ObservationSet(g.t_star, sample_at_sensors(g, x_sensors), x_sensors, sigma)


@pytest.fixture(scope="module")
def truth_case(short_problem, x_sensors):
    problem, piecewise, scales = short_problem
    truth = piecewise.with_params([0.9, 1.2, piecewise.params[2]])
    # warm-up of the cost simulation starts at W0 - 48 h, so generate from there
    obs = synthetic_obs(problem, truth, piecewise, x_sensors, start=W0 - 48.0)
    return problem, piecewise, scales, truth, obs


def test_uncertainty_hand_values():
    m = UncertaintyModel()
    assert m.combine([0.0], [0.3])[0] == 0.5
    assert m.combine([30.0], [0.1])[0] == pytest.approx(np.sqrt(0.25 + 0.09))
    assert m.combine([30.0], [0.1])[0] == pytest.approx(0.583, abs=1e-3)
    assert m.combine([30.0], [0.0])[0] == pytest.approx(np.sqrt(0.25 + 0.45**2))
    assert m.combine([30.0], [0.0])[0] == pytest.approx(0.672, abs=1e-3)
    with pytest.raises(ConfigError):
        UncertaintyModel(sigma_T=0.0)


def test_propagation_on_linear_profile():
    # 20 degC -> 5 degC across 0.5 m: dT/dx = -30 degC/m everywhere
    scales = ReferenceScales(0.5, 5.0, 15.0, 3600.0, 1.0, 1.0)
    b = BoundarySeries(np.array([0.0, 100.0]), np.ones(2), np.zeros(2))
    pb = WallProblem(CapacityModel((1.0,)), 0.01, b, SpaceGrid(101))
    g = simulate(pb, ConductivityModel(PIECEWISE, (1.0,), (1.0,)), 0.0, 10.0)
    sigma = propagate_uncertainty(g, [0.0, 0.2, 0.5], scales)
    np.testing.assert_allclose(sigma, [np.sqrt(0.25 + 0.45**2), np.sqrt(0.34), np.sqrt(0.34)], rtol=1e-9)
    assert np.all(sigma >= 0.5)
    flat = simulate(WallProblem(CapacityModel((1.0,)), 0.01, BoundarySeries(np.array([0.0, 100.0]),
                    np.ones(2), np.ones(2)), SpaceGrid(101)),
                    ConductivityModel(PIECEWISE, (1.0,), (1.0,)), 0.0, 10.0)
    np.testing.assert_allclose(propagate_uncertainty(flat, [0.2], scales), 0.5)


def test_self_residual_is_zero(truth_case):
    problem, piecewise, _, truth, obs = truth_case
    ev = cost(truth.params, problem, obs, (W0, W1), piecewise)
    assert ev.J <= 1e-12
    assert ev.J == pytest.approx(ev.contributions.sum())


def test_weight_scaling(truth_case):
    problem, piecewise, _, _, obs = truth_case
    P = piecewise.params
    J1 = cost(P, problem, obs, (W0, W1), piecewise).J
    J2 = cost(P, problem, obs.with_sigma(2 * obs.sigma), (W0, W1), piecewise).J
    assert J1 > 0
    assert J2 == pytest.approx(J1 / 4, rel=1e-14)


@pytest.mark.parametrize("kind", [PIECEWISE, LINEAR, QUADRATIC])
def test_gradient_matches_finite_differences(short_problem, x_sensors, kind):
    problem, piecewise, _ = short_problem
    apriori = apriori_model(kind, piecewise)
    truth = apriori.with_params(np.asarray(apriori.params) * 1.1)
    obs = synthetic_obs(problem, truth, apriori, x_sensors, start=W0 - 48.0)
    mask = identifiable_mask(apriori, x_sensors)
    wc = WindowCost(problem, obs, W0, W1, apriori, mask)
    rng = np.random.default_rng(4)
    for _ in range(3):
        free = np.asarray(apriori.params)[mask] * rng.uniform(0.85, 1.15, mask.sum())
        J, g = wc.value_and_grad(free)
        for i in range(len(free)):
            h = 1e-5 * max(1.0, abs(free[i]))
            fp, fm = free.copy(), free.copy()
            fp[i] += h
            fm[i] -= h
            fd = (wc(fp) - wc(fm)) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-2, abs=1e-6 * max(1.0, abs(J)))


def test_invalid_candidate_is_penalized(truth_case):
    problem, piecewise, _, _, obs = truth_case
    wc = WindowCost(problem, obs, W0, W1, piecewise, [True, True, False])
    near = wc.evaluate([-0.05, 1.0, piecewise.params[2]])
    far = wc.evaluate([-9.0, 1.0, piecewise.params[2]])
    assert near.penalized and near.J >= PENALTY
    assert far.J > near.J


def test_coverage_errors(truth_case):
    problem, piecewise, _, _, obs = truth_case
    with pytest.raises(CoverageError):
        WindowCost(problem, obs, 10.0, 40.0, piecewise)
    with pytest.raises(ConfigError):
        WindowCost(problem, obs, W1, W0, piecewise)


def test_observation_validation():
    with pytest.raises(ConfigError):
        ObservationSet(np.array([0.0, 1.0]), np.zeros((2, 2)), [0.1, 0.5], [0.1, -0.1])
    with pytest.raises(ConfigError):
        ObservationSet(np.array([0.0, 0.0]), np.zeros((2, 1)), [0.1], 0.1)
    with pytest.raises(ConfigError):
        ObservationSet(np.array([0.0, 1.0]), np.zeros((3, 1)), [0.1], 0.1)
    with pytest.raises(ConfigError):
        ObservationSet(np.array([0.0, 1.0]), np.array([[0.0], [np.nan]]), [0.1], 0.1)


def test_residuals_vanish_for_exact_model(truth_case):
    problem, piecewise, scales, truth, obs = truth_case
    _, num, ob, stats = residual_analysis(truth, problem, obs, (W0, W1), scales, init_model=piecewise)
    for s in stats:
        assert s.mean_abs <= 1e-10 and s.std <= 1e-10
    np.testing.assert_allclose(num, ob, atol=1e-9)


def test_residual_statistics():
    rng = np.random.default_rng(0)
    r = rng.normal(0, 0.5, (5000, 2))
    stats = residual_stats(np.arange(5000.0), r, np.zeros_like(r))
    for s in stats:
        assert s.std == pytest.approx(0.5, rel=0.05)
        assert s.mean_abs == pytest.approx(0.5 * np.sqrt(2 / np.pi), rel=0.05)
        assert abs(s.lag1_autocorr) < 0.05
        assert np.sum(s.pdf * np.diff(s.bin_edges)) == pytest.approx(1.0)


def test_estimate_recovers_noise_free_truth(truth_case, x_sensors):
    problem, piecewise, scales, truth, obs = truth_case
    mask = identifiable_mask(piecewise, x_sensors)
    lo, hi = default_bounds(piecewise)
    cfg = OptimizerConfig(lo, hi, seed=0, max_iterations=200)
    rep = estimate(problem, obs, (W0, W1), piecewise, scales, cfg, mask)
    np.testing.assert_allclose(rep.params[:2], truth.params[:2], rtol=1e-4)
    assert rep.params[2] == piecewise.params[2]
    assert np.all(np.diff(rep.trace) <= 0)
    assert rep.switch_log[0]["algorithm"] == "de"
    again = estimate(problem, obs, (W0, W1), piecewise, scales, cfg, mask)
    a, b = rep.as_dict(scales), again.as_dict(scales)
    a.pop("runtime_s")
    b.pop("runtime_s")
    assert a == b
    assert a["P_est_dimensional"]["k1"] == pytest.approx(rep.params[0] * scales.k_ref)


def test_default_bounds():
    piecewise = ConductivityModel(PIECEWISE, (1.0, 1.3, 0.46), (0.4, 0.96, 1.0))
    lo, hi = default_bounds(apriori_model(LINEAR, piecewise))
    np.testing.assert_array_equal(lo, [0.1, -10, -10, 0.1])
    np.testing.assert_array_equal(hi, [5, 10, 10, 5])
    lo, hi = default_bounds(apriori_model(QUADRATIC, piecewise))
    np.testing.assert_array_equal(lo, [0.1, -10, -10])


def test_twin_cost_prefers_truth(twin0, twin0_problem, x_sensors):
    problem, piecewise = twin0_problem
    sc = twin0.scales
    obs = ObservationSet.from_celsius(twin0.hours, twin0.obs, np.asarray(x_sensors) * sc.L_ref, 0.5, sc)
    window = (39 * 24.0, 42 * 24.0)
    assert cost(twin0.truth.params, problem, obs, window, piecewise).J < \
        cost(piecewise.params, problem, obs, window, piecewise).J
    # residuals at the truth are the injected noise plus a small grid mismatch
    _, _, _, stats = residual_analysis(twin0.truth, problem, obs, window, sc, init_model=piecewise)
    for s in stats:
        assert 0.7 * 0.5 <= s.std <= 1.3 * 0.5
