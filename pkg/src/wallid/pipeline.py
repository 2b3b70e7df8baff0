"""Campaign wiring shared by the CLI and the estimator wrappers.

A :class:`Campaign` holds the boundary data already scaled onto the
dimensionless problem, plus (optionally) the sensor observations, and
exposes the pipeline steps: simulate, sensitivities, window scan,
estimation and full-span validation.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import CampaignConfig, check_data_span
from .estimation import (EstimationReport, ObservationSet, UncertaintyModel, default_bounds, estimate,
                         propagate_uncertainty, residual_analysis)
from .exceptions import ConfigError
from .heat_solver import BoundarySeries, SpaceGrid, WallProblem, sample_at_sensors, simulate
from .io import read_boundary_csv, read_observation_csv
from .oed import MeasurementPlan, ScanResult, scan_windows
from .optimize import ROSTER, OptimizerConfig
from .sensitivity import sensor_sensitivities, solve_sensitivities
from .wall_model import (ConductivityModel, ReferenceScales, apriori_model, identifiable_mask,
                         nondimensionalize)

log = logging.getLogger(__name__)


@dataclass
class Campaign:
    cfg: CampaignConfig
    hours: np.ndarray
    T_out: np.ndarray
    T_in: np.ndarray
    scales: ReferenceScales
    problem: WallProblem
    piecewise: ConductivityModel
    obs_hours: Optional[np.ndarray] = None
    obs_C: Optional[np.ndarray] = None

    # construction --------------------------------------------------------
    @classmethod
    def from_arrays(cls, cfg: CampaignConfig, hours, T_out, T_in, obs_hours=None,
                    obs_C=None) -> "Campaign":
        hours = np.asarray(hours, dtype=float)
        T_out = np.asarray(T_out, dtype=float)
        T_in = np.asarray(T_in, dtype=float)
        check_data_span(cfg, hours)
        temps = np.concatenate([T_out, T_in])
        default = ReferenceScales.default(cfg.wall, temps, t_ref=cfg.scales.t_ref)
        scales = ReferenceScales(default.L_ref,
                                 default.T_ref if cfg.scales.T_ref is None else cfg.scales.T_ref,
                                 default.dT_ref if cfg.scales.dT_ref is None else cfg.scales.dT_ref,
                                 default.t_ref, default.k_ref, default.c_ref)
        piecewise, cmodel, _ = nondimensionalize(cfg.wall, scales)
        bounds = BoundarySeries.from_celsius(hours, T_out, T_in, scales)
        space = SpaceGrid(int(round(1.0 / cfg.grid.dx_star)) + 1)
        problem = WallProblem(cmodel, scales.fourier, bounds, space, cfg.grid.dt_star, cfg.grid.blowup)
        if obs_C is not None:
            obs_C = np.asarray(obs_C, dtype=float)
            if obs_C.ndim == 1:
                obs_C = obs_C[:, None]
            if obs_C.shape[1] != cfg.sensors.n_sensors:
                raise ConfigError(f"observations have {obs_C.shape[1]} sensor columns, config lists "
                                  f"{cfg.sensors.n_sensors} sensors")
            obs_hours = np.asarray(obs_hours, dtype=float)
        return cls(cfg, hours, T_out, T_in, scales, problem, piecewise, obs_hours, obs_C)

    @classmethod
    def from_config(cls, cfg: CampaignConfig, require_observations: bool = False) -> "Campaign":
        if cfg.data.boundary is None:
            raise ConfigError("data.boundary: no boundary CSV configured")
        hours, T_out, T_in = read_boundary_csv(cfg.data.boundary)
        obs_hours = obs_C = None
        if cfg.data.observations is not None:
            obs_hours, obs_C = read_observation_csv(cfg.data.observations)
        elif require_observations:
            raise ConfigError("data.observations: no observation CSV configured")
        return cls.from_arrays(cfg, hours, T_out, T_in, obs_hours, obs_C)

    # helpers -------------------------------------------------------------
    @property
    def x_sensors(self) -> np.ndarray:
        return np.asarray(self.cfg.sensors.positions) / self.scales.L_ref

    @property
    def span_days(self) -> float:
        return (self.hours[-1] - self.hours[0]) / 24.0

    @property
    def uncertainty(self) -> UncertaintyModel:
        s = self.cfg.sensors
        return UncertaintyModel(s.sigma_T, s.delta_interior, s.delta_boundary)

    def tstar(self, hours) -> float:
        return float(self.scales.tstar_from_hours(hours))

    def apriori(self, kind: str) -> ConductivityModel:
        est = self.cfg.estimation
        params = est.apriori if (est.apriori is not None and kind == est.kind) else None
        return apriori_model(kind, self.piecewise, est.linear_layer, params)

    def model(self, kind: str, params=None) -> ConductivityModel:
        base = self.apriori(kind)
        if params is None:
            return base
        if len(params) != base.n_params:
            raise ConfigError(f"{kind} model takes {base.n_params} parameters, got {len(params)}")
        return base.with_params(params)

    def mask(self, kind: str) -> np.ndarray:
        return identifiable_mask(self.apriori(kind), self.x_sensors)

    def optimizer_config(self, kind: str, seed: Optional[int] = None, threads: int = 1) -> OptimizerConfig:
        o = self.cfg.optimizer
        est = self.cfg.estimation
        lo, hi = default_bounds(self.apriori(kind))
        if est.lower is not None and kind == est.kind:
            lo = np.asarray(est.lower, dtype=float)
        if est.upper is not None and kind == est.kind:
            hi = np.asarray(est.upper, dtype=float)
        return OptimizerConfig(lo, hi, o.de_population_factor, o.ga_population_factor,
                               o.max_iterations, o.max_evaluations, o.stall_tol, o.stall_window,
                               o.pass_tol, tuple(o.roster or ROSTER), o.target_cost,
                               self.cfg.seed if seed is None else seed, threads)

    def _window(self, start_day=None, end_day=None):
        first, last = self.hours[0], self.hours[-1]
        h0 = first if start_day is None else 24.0 * start_day
        h1 = last if end_day is None else 24.0 * end_day
        if h0 < first - 1e-9 or h1 > last + 1e-9 or h1 <= h0:
            raise ConfigError(f"window [{h0:g}, {h1:g}] h is not inside the data span "
                              f"[{first:g}, {last:g}] h")
        return h0, h1

    # pipeline steps ------------------------------------------------------
    def simulate(self, kind: str, params=None, start_day=None, end_day=None):
        """Sensor traces in degC; returns ``(hours, T, runtime_s)``."""
        h0, h1 = self._window(start_day, end_day)
        model = self.model(kind, params)
        model.check_positive()
        tic = time.perf_counter()
        grid = simulate(self.problem, model, self.tstar(h0), self.tstar(h1), cadence=self.tstar(1.0))
        runtime = time.perf_counter() - tic
        T = self.scales.celsius_from_u(sample_at_sensors(grid, self.x_sensors))
        return self.scales.hours_from_tstar(grid.t_star), T, runtime

    def sensitivities(self, kind: str, start_day=None, duration_day=None, params=None):
        """``(hours, traces, param_indices)`` with traces (n_t, n_sensors, n_free)."""
        start_day = self.hours[0] / 24.0 if start_day is None else start_day
        end_day = None if duration_day is None else start_day + duration_day
        h0, h1 = self._window(start_day, end_day)
        model = self.model(kind, params)
        mask = self.mask(kind)
        _, fields = solve_sensitivities(self.problem, model, self.tstar(h0), self.tstar(h1),
                                        param_mask=mask, cadence=self.tstar(1.0))
        traces = sensor_sensitivities(fields, self.x_sensors)
        return self.scales.hours_from_tstar(fields[0].t_star), traces, [f.param_index for f in fields]

    def scan(self, kinds: Optional[Sequence[str]] = None, durations=None, threads: int = 1) -> dict:
        """``{kind: {duration: ScanResult}}``."""
        kinds = list(kinds or self.cfg.oed.kinds)
        durations = list(durations or self.cfg.oed.durations)
        sigma = self.cfg.sensors.sigma_T / self.scales.dT_ref
        out = {}
        for kind in kinds:
            out[kind] = scan_windows(self.problem, self.apriori(kind), self.scales, self.x_sensors,
                                     durations, sigma, self.mask(kind), self.cfg.oed.spinup_hours,
                                     self.cfg.oed.sliding, 1.0, threads)
        return out

    def best_window(self, kind: str, duration_day: float, threads: int = 1) -> MeasurementPlan:
        scan: ScanResult = self.scan([kind], [duration_day], threads)[kind][float(duration_day)]
        if scan.degenerate:
            raise ConfigError("window scan is degenerate (all Psi = 0); set estimation.t_ini_day")
        return scan.argmax.plan

    def propagated_sigma(self, kind: str, h0: float, h1: float) -> np.ndarray:
        """Per-sensor sigma (degC) from the a-priori field over ``[h0, h1]`` hours."""
        warm = max(self.hours[0], h0 - self.cfg.estimation.warmup_hours)
        grid = simulate(self.problem, self.apriori(kind), self.tstar(warm), self.tstar(h1),
                        cadence=self.tstar(1.0))
        return propagate_uncertainty(grid, self.x_sensors, self.scales, self.uncertainty,
                                     self.tstar(h0), self.tstar(h1))

    def observations(self, sigma_C) -> ObservationSet:
        if self.obs_C is None:
            raise ConfigError("data.observations: observations are required for this step")
        return ObservationSet.from_celsius(self.obs_hours, self.obs_C, self.cfg.sensors.positions,
                                           sigma_C, self.scales)

    def estimate(self, kind: str, t_ini_day=None, duration_day=None, seed: Optional[int] = None,
                 threads: int = 1) -> EstimationReport:
        est = self.cfg.estimation
        duration_day = est.duration_day if duration_day is None else duration_day
        if t_ini_day is None:
            t_ini_day = est.t_ini_day
        if t_ini_day is None:
            t_ini_day = self.best_window(kind, duration_day, threads).t_ini
            log.info("estimation window from scan: day %g (+%g d)", t_ini_day, duration_day)
        h0, h1 = self._window(t_ini_day, t_ini_day + duration_day)
        sigma = self.propagated_sigma(kind, h0, h1)
        obs = self.observations(sigma)
        return estimate(self.problem, obs, (self.tstar(h0), self.tstar(h1)), self.apriori(kind),
                        self.scales, self.optimizer_config(kind, seed, threads), self.mask(kind),
                        est.warmup_hours)

    def validate(self, kind: str, params, bins: int = 30, tail_days: float = 3.0) -> dict:
        """Full-span residuals at ``params`` against the mean propagated sigma."""
        model = self.model(kind, params)
        h0, h1 = self.hours[0], self.hours[-1]
        if self.obs_hours is None:
            raise ConfigError("data.observations: observations are required for validation")
        h0 = max(h0, self.obs_hours[0])
        h1 = min(h1, self.obs_hours[-1])
        sigma = self.propagated_sigma(kind, h0, h1)
        obs = self.observations(sigma)
        hours, num, ob, stats = residual_analysis(model, self.problem, obs,
                                                  (self.tstar(h0), self.tstar(h1)), self.scales,
                                                  warmup=0.0, bins=bins)
        mean_abs = np.array([s.mean_abs for s in stats])
        passed = bool(np.all(mean_abs <= sigma))
        tail = hours >= hours[-1] - 24.0 * tail_days
        return {
            "kind": kind,
            "params": list(map(float, model.params)),
            "span_hours": [float(h0), float(h1)],
            "sigma_C": sigma.tolist(),
            "mean_abs_residual_C": mean_abs.tolist(),
            "residuals": [s.as_dict() for s in stats],
            "passed": passed,
            "tail": {"hours": hours[tail], "simulated_C": num[tail], "observed_C": ob[tail]},
        }
