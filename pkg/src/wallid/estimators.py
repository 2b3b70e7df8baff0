"""scikit-learn style wrappers around the campaign pipeline.

``X`` holds the hourly boundary temperatures ``[T_out, T_in]`` in degC with
shape (n_hours, 2); ``y`` holds the sensor temperatures with shape
(n_hours, n_sensors). Rows are consecutive hours starting at hour 0 unless
``hours`` is passed to ``fit``.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .config import build_config
from .exceptions import ConfigError
from .pipeline import Campaign
from .wall_model import KINDS


def _validate_boundary(X) -> np.ndarray:
    X = check_array(X, dtype=float, ensure_min_samples=2)
    if X.shape[1] != 2:
        raise ValueError(f"X must have two columns [T_out, T_in], got {X.shape[1]}")
    return X


def _hours(hours, n) -> np.ndarray:
    if hours is None:
        return np.arange(n, dtype=float)
    hours = check_array(np.asarray(hours, dtype=float).reshape(-1, 1), ensure_min_samples=2).ravel()
    if len(hours) != n:
        raise ValueError("hours must have one entry per row of X")
    if np.any(np.diff(hours) <= 0):
        raise ValueError("hours must be strictly increasing")
    return hours


class _CampaignMixin:
    def _config(self, n_sensors=None):
        raw = {"wall": {"layers": self.layers} if self.layers is not None else None,
               "sensors": {"positions": list(self.sensor_positions), "sigma_T": self.sigma_T},
               "grid": {"dx_star": self.dx_star, "dt_star": self.dt_star},
               "oed": {"spinup_hours": self.spinup_hours, "durations": [self.duration_day]},
               "seed": self.random_state}
        raw = {k: v for k, v in raw.items() if v is not None}
        cfg = build_config(raw)
        if n_sensors is not None and n_sensors != cfg.sensors.n_sensors:
            raise ValueError(f"y has {n_sensors} columns but {cfg.sensors.n_sensors} sensor positions are set")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        return cfg


class ConductivityEstimator(_CampaignMixin, RegressorMixin, BaseEstimator):
    """Estimate k*(x*) from one measurement window, then predict sensor traces.

    Parameters
    ----------
    kind : {"piecewise", "linear", "quadratic"}
    sensor_positions : sensor depths in metres from the outdoor surface
    t_ini_day : window start; None selects the D-optimal window
    duration_day : window length in days
    layers : list of {thickness, k, c} dicts (None: case-study wall)
    """

    def __init__(self, kind="quadratic", sensor_positions=(0.05, 0.23, 0.42), t_ini_day=None,
                 duration_day=3.0, warmup_hours=48.0, layers=None, sigma_T=0.5, dx_star=0.01,
                 dt_star=0.01, spinup_hours=12.0, max_iterations=500, max_evaluations=20000,
                 random_state=0, n_threads=1):
        self.kind = kind
        self.sensor_positions = sensor_positions
        self.t_ini_day = t_ini_day
        self.duration_day = duration_day
        self.warmup_hours = warmup_hours
        self.layers = layers
        self.sigma_T = sigma_T
        self.dx_star = dx_star
        self.dt_star = dt_star
        self.spinup_hours = spinup_hours
        self.max_iterations = max_iterations
        self.max_evaluations = max_evaluations
        self.random_state = random_state
        self.n_threads = n_threads

    def fit(self, X, y, hours=None):
        X, y = check_X_y(X, y, dtype=float, multi_output=True, y_numeric=True)
        X = _validate_boundary(X)
        y = y.reshape(len(y), -1)
        hours = _hours(hours, len(X))
        cfg = self._config(y.shape[1])
        cfg.estimation.kind = self.kind
        cfg.estimation.duration_day = float(self.duration_day)
        cfg.estimation.warmup_hours = float(self.warmup_hours)
        cfg.optimizer.max_iterations = int(self.max_iterations)
        cfg.optimizer.max_evaluations = int(self.max_evaluations)
        camp = Campaign.from_arrays(cfg, hours, X[:, 0], X[:, 1], hours, y)
        report = camp.estimate(self.kind, self.t_ini_day, self.duration_day, seed=self.random_state,
                               threads=self.n_threads)
        self.campaign_ = camp
        self.report_ = report
        self.params_ = report.params.copy()
        self.param_names_ = list(report.param_names)
        self.model_ = camp.model(self.kind, report.params)
        self.scales_ = camp.scales
        self.window_hours_ = report.window_hours
        self.n_features_in_ = X.shape[1]
        return self

    def conductivity(self, x_m) -> np.ndarray:
        """Estimated conductivity in W/(m K) at depths ``x_m``."""
        check_is_fitted(self, "model_")
        return self.model_.evaluate(np.asarray(x_m, dtype=float) / self.scales_.L_ref) * self.scales_.k_ref

    def predict(self, X, hours=None) -> np.ndarray:
        """Sensor temperatures (degC) simulated from boundary data ``X``."""
        check_is_fitted(self, "model_")
        X = _validate_boundary(X)
        hours = _hours(hours, len(X))
        cfg = self.campaign_.cfg
        # same scaling as the fit so the dimensionless parameters carry over
        cfg.scales.T_ref = self.scales_.T_ref
        cfg.scales.dT_ref = self.scales_.dT_ref
        cfg.oed.durations = [min(cfg.oed.durations[0], (hours[-1] - hours[0]) / 24.0)]
        cfg.estimation.t_ini_day = None
        camp = Campaign.from_arrays(cfg, hours, X[:, 0], X[:, 1])
        _, T, _ = camp.simulate(self.kind, self.params_, hours[0] / 24.0, hours[-1] / 24.0)
        return T


class WindowSelector(_CampaignMixin, TransformerMixin, BaseEstimator):
    """D-optimal window selection; ``transform`` keeps the rows of the best window."""

    def __init__(self, kind="quadratic", sensor_positions=(0.05, 0.23, 0.42), duration_day=3.0,
                 layers=None, sigma_T=0.5, dx_star=0.01, dt_star=0.01, spinup_hours=12.0,
                 sliding=False, random_state=0, n_threads=1):
        self.kind = kind
        self.sensor_positions = sensor_positions
        self.duration_day = duration_day
        self.layers = layers
        self.sigma_T = sigma_T
        self.dx_star = dx_star
        self.dt_star = dt_star
        self.spinup_hours = spinup_hours
        self.sliding = sliding
        self.random_state = random_state
        self.n_threads = n_threads

    def fit(self, X, y=None, hours=None):
        X = _validate_boundary(X)
        hours = _hours(hours, len(X))
        cfg = self._config()
        cfg.oed.sliding = bool(self.sliding)
        camp = Campaign.from_arrays(cfg, hours, X[:, 0], X[:, 1])
        scan = camp.scan([self.kind], [float(self.duration_day)], self.n_threads)[self.kind]
        result = scan[float(self.duration_day)]
        if result.degenerate:
            raise ConfigError("window scan is degenerate: no window carries information")
        self.scan_ = result
        self.best_plan_ = result.argmax.plan
        self.worst_plan_ = result.argmin.plan
        self.psi_ = np.array([w.psi for w in result.windows])
        self.t_ini_days_ = np.array([w.plan.t_ini for w in result.windows])
        self.hours_ = hours
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X, hours=None) -> np.ndarray:
        check_is_fitted(self, "best_plan_")
        X = _validate_boundary(X)
        hours = _hours(hours, len(X))
        keep = (hours >= self.best_plan_.start_hours) & (hours <= self.best_plan_.end_hours)
        return X[keep]
