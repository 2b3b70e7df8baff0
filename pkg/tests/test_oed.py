from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wallid.exceptions import ConfigError, CoverageError
from wallid.oed import (MeasurementPlan, d_criterion, evaluate_window, fisher_matrix, scan_windows,
                        window_starts)


def test_single_parameter_hand_value():
    # X = 1 on one sensor for the whole day: F = (24 - 12) / 24 / sigma^2
    t = np.arange(0, 25, dtype=float)
    traces = np.ones((25, 1, 1))
    F = fisher_matrix(traces, t, MeasurementPlan(0.0, 1.0), sigma=0.5)
    assert F.entries[0, 0] == pytest.approx(0.5 / 0.25)


def test_linear_trace_hand_value():
    t = np.arange(0, 49, dtype=float)
    traces = np.stack([np.ones(49), t / 48.0], axis=-1)[:, None, :]
    F = fisher_matrix(traces, t, MeasurementPlan(0.0, 2.0), sigma=1.0, spinup_hours=0.0)
    # integrals of 1, t/48 and (t/48)^2 over 48 h, divided by 48 h (trapezoid)
    np.testing.assert_allclose(F.entries, [[1.0, 0.5], [0.5, 1 / 3 + 1 / (6 * 48**2)]], rtol=1e-12)
    assert d_criterion(F) == pytest.approx(np.linalg.det(F.entries))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n_p=st.integers(1, 4), sigma=st.floats(0.01, 10.0))
def test_fisher_symmetric_psd_and_sigma_scaling(seed, n_p, sigma):
    rng = np.random.default_rng(seed)
    t = np.arange(0, 73, dtype=float)
    traces = rng.normal(size=(73, 3, n_p))
    plan = MeasurementPlan(0.0, 3.0)
    F1 = fisher_matrix(traces, t, plan, 1.0)
    Fs = fisher_matrix(traces, t, plan, sigma)
    assert np.array_equal(F1.entries, F1.entries.T)
    assert np.linalg.eigvalsh(F1.entries).min() >= -1e-12 * np.trace(F1.entries)
    psi1, psis = d_criterion(F1), d_criterion(Fs)
    assert psis == pytest.approx(psi1 / sigma ** (2 * n_p), rel=1e-8)


def test_rank_deficient_matrix_gives_zero():
    t = np.arange(0, 25, dtype=float)
    x = np.sin(t)[:, None, None]
    traces = np.concatenate([x, 2 * x], axis=-1)
    F = fisher_matrix(traces, t, MeasurementPlan(0.0, 1.0), 1.0)
    psi, clamped = d_criterion(F, return_flag=True)
    assert psi == 0.0 or abs(psi) < 1e-14
    assert F.rank() == 1


def test_negative_determinant_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        psi = d_criterion(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert psi < 0 and caught


def test_plan_and_coverage_errors():
    with pytest.raises(ConfigError):
        MeasurementPlan(0.0, 0.0)
    with pytest.raises(ConfigError):
        MeasurementPlan(-1.0, 1.0)
    t = np.arange(0, 25, dtype=float)
    with pytest.raises(CoverageError):
        fisher_matrix(np.ones((25, 1, 1)), t, MeasurementPlan(0.5, 1.0), 1.0)
    with pytest.raises(CoverageError):
        window_starts(5.0, 7.0)


def test_window_starts():
    assert len(window_starts(365.0, 7.0)) == 52
    assert len(window_starts(365.0, 3.0)) == 121
    assert len(window_starts(365.0, 1.0)) == 365
    np.testing.assert_array_equal(window_starts(10.0, 3.0, sliding=True), np.arange(8.0))


def test_correlation_matrix():
    t = np.arange(0, 25, dtype=float)
    traces = np.stack([np.sin(t / 3), np.cos(t / 3)], axis=-1)[:, None, :]
    C = fisher_matrix(traces, t, MeasurementPlan(0.0, 1.0), 1.0).correlation()
    np.testing.assert_allclose(np.diag(C), 1.0)
    assert abs(C[0, 1]) <= 1.0


def test_scan_on_short_record(short_problem, x_sensors):
    problem, piecewise, scales = short_problem
    scans = scan_windows(problem, piecewise, scales, x_sensors, durations=(1, 3), sigma=0.05,
                         mask=[True, True, False])
    assert len(scans[1.0].windows) == 10
    assert len(scans[3.0].windows) == 3
    for scan in scans.values():
        assert not scan.failed and not scan.degenerate
        assert all(w.rank == 2 and w.psi > 0 for w in scan.windows)
    w = evaluate_window(problem, piecewise, scales, x_sensors, MeasurementPlan(3.0, 3.0), 0.05,
                        [True, True, False])
    assert w.psi == scans[3.0].windows[1].psi


def test_threaded_scan_matches_serial(short_problem, x_sensors):
    problem, piecewise, scales = short_problem
    a = scan_windows(problem, piecewise, scales, x_sensors, durations=(1,), sigma=0.05,
                     mask=[True, True, False])
    b = scan_windows(problem, piecewise, scales, x_sensors, durations=(1,), sigma=0.05,
                     mask=[True, True, False], threads=3)
    assert [w.psi for w in a[1.0].windows] == [w.psi for w in b[1.0].windows]
