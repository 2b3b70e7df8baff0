"""Weighted least-squares estimation of the conductivity parameters.

The cost over a measurement window ``[t0, t1]`` (t* units) is::

    J(P) = sum_i w_i * integral (u_num(chi_i, t; P) - u_obs_i(t))^2 dt,   w_i = 1/sigma_i^2

with the integral taken by the trapezoidal rule on the observation cadence.
The forward model is started ``warmup_hours`` before the window from the
steady profile of the a-priori model; that initial state does not depend on
P, so the direct sensitivities give the exact discrete gradient.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import ConfigError, CoverageError, EstimationError, InvalidParameterError, NumericalError
from .heat_solver import SolutionGrid, WallProblem, sample_at_sensors, sensor_gradient, simulate
from .optimize import PENALTY, OptimizeResult, OptimizerConfig, hybrid_optimize
from .sensitivity import sensor_sensitivities, solve_sensitivities
from .wall_model import LINEAR, ConductivityModel, ReferenceScales

log = logging.getLogger(__name__)

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

CONDUCTIVITY_BOUNDS = (0.1, 5.0)
COEFFICIENT_BOUNDS = (-10.0, 10.0)


# uncertainty -------------------------------------------------------------

@dataclass(frozen=True)
class UncertaintyModel:
    sigma_T: float = 0.5  # degC, sensor accuracy
    delta_interior: float = 0.01  # m, placement uncertainty
    delta_boundary: float = 0.015  # m, for sensors on the surfaces

    def __post_init__(self):
        if not self.sigma_T > 0:
            raise ConfigError("uncertainty.sigma_T must be > 0")
        if self.delta_interior < 0 or self.delta_boundary < 0:
            raise ConfigError("uncertainty.delta_* must be >= 0")

    def deltas(self, x_star) -> np.ndarray:
        x = np.asarray(x_star, dtype=float)
        on_surface = np.isclose(x, 0.0) | np.isclose(x, 1.0)
        return np.where(on_surface, self.delta_boundary, self.delta_interior)

    def combine(self, gradient_C_per_m, x_star) -> np.ndarray:
        """sqrt(sigma_T^2 + (dT/dx * delta)^2) per sensor, degC."""
        sigma_x = np.abs(np.asarray(gradient_C_per_m, dtype=float)) * self.deltas(x_star)
        return np.sqrt(self.sigma_T**2 + sigma_x**2)


def propagate_uncertainty(grid: SolutionGrid, x_star, scales: ReferenceScales,
                          model: UncertaintyModel = UncertaintyModel(), start: Optional[float] = None,
                          end: Optional[float] = None) -> np.ndarray:
    """Per-sensor sigma in degC from the a-priori temperature field.

    The dimensional gradient at each sensor is RMS-averaged over the recorded
    levels in ``[start, end]`` (default: all of them).
    """
    t = grid.t_star
    sel = np.ones(len(t), dtype=bool)
    if start is not None:
        sel &= t >= start - 1e-9
    if end is not None:
        sel &= t <= end + 1e-9
    if not sel.any():
        raise CoverageError("no recorded levels inside the uncertainty window")
    g = sensor_gradient(grid, x_star)[sel] * scales.dT_ref / scales.L_ref
    rms = np.sqrt(np.mean(g**2, axis=0))
    return model.combine(rms, x_star)


# observations and cost ----------------------------------------------------

@dataclass(frozen=True)
class ObservationSet:
    t_star: np.ndarray
    u_obs: np.ndarray  # (n_times, n_sensors)
    x_star: np.ndarray
    sigma: np.ndarray  # dimensionless, per sensor

    def __post_init__(self):
        t = np.asarray(self.t_star, dtype=float)
        u = np.asarray(self.u_obs, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        x = np.atleast_1d(np.asarray(self.x_star, dtype=float))
        s = np.broadcast_to(np.asarray(self.sigma, dtype=float), x.shape).copy()
        if u.shape != (len(t), len(x)):
            raise ConfigError(f"observations have shape {u.shape}, expected ({len(t)}, {len(x)})")
        if len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ConfigError("observation times must be strictly increasing")
        if not np.all(np.isfinite(u)):
            raise ConfigError("observations contain NaN or inf")
        if np.any(s <= 0):
            raise ConfigError("observation sigma must be > 0")
        object.__setattr__(self, "t_star", t)
        object.__setattr__(self, "u_obs", u)
        object.__setattr__(self, "x_star", x)
        object.__setattr__(self, "sigma", s)

    @classmethod
    def from_celsius(cls, hours, T_obs, positions_m, sigma_C, scales: ReferenceScales) -> "ObservationSet":
        return cls(scales.tstar_from_hours(hours), scales.u_from_celsius(T_obs),
                   np.asarray(positions_m, dtype=float) / scales.L_ref,
                   np.asarray(sigma_C, dtype=float) / scales.dT_ref)

    @property
    def n_sensors(self) -> int:
        return len(self.x_star)

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.sigma**2

    @property
    def cadence(self) -> float:
        return float(np.median(np.diff(self.t_star)))

    def with_sigma(self, sigma) -> "ObservationSet":
        return ObservationSet(self.t_star, self.u_obs, self.x_star, sigma)

    def check_covers(self, start: float, end: float):
        tol = 1e-9 * max(1.0, abs(end))
        if self.t_star[0] > start + tol or self.t_star[-1] < end - tol:
            raise CoverageError(f"observations [{self.t_star[0]:g}, {self.t_star[-1]:g}] do not cover "
                                f"window [{start:g}, {end:g}] (t*)")

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.t_star, self.u_obs[:, i]) for i in range(self.n_sensors)],
                        axis=-1)


@dataclass
class CostEvaluation:
    J: float
    contributions: np.ndarray
    params: np.ndarray
    penalized: bool = False
    gradient: Optional[np.ndarray] = None
    message: str = ""


def default_bounds(model: ConductivityModel) -> tuple[np.ndarray, np.ndarray]:
    """Conductivity-like slots in [0.1, 5], polynomial coefficients in [-10, 10]."""
    names = model.param_names
    if model.kind == LINEAR:
        # the intercept of the linear layer is extrapolated to x* = 0 and may be negative
        lin = f"k{model.linear_layer + 1}0"
        conductivity = [n.startswith("k") and n != lin for n in names]
    else:
        conductivity = [n.startswith("k") for n in names]
    lo = np.where(conductivity, CONDUCTIVITY_BOUNDS[0], COEFFICIENT_BOUNDS[0])
    hi = np.where(conductivity, CONDUCTIVITY_BOUNDS[1], COEFFICIENT_BOUNDS[1])
    return lo.astype(float), hi.astype(float)


class WindowCost:
    """J(P) over one window, callable on the free parameter subvector."""

    def __init__(self, problem: WallProblem, obs: ObservationSet, start: float, end: float,
                 apriori: ConductivityModel, mask=None, lower=None, upper=None,
                 warmup: float = 48.0):
        if not end > start:
            raise ConfigError("window end must be after its start")
        obs.check_covers(start, end)
        problem.boundary.check_covers(start, end)
        self.problem = problem
        self.obs = obs
        self.start = float(start)
        self.end = float(end)
        self.apriori = apriori
        self.mask = np.ones(apriori.n_params, bool) if mask is None else np.asarray(mask, bool)
        if self.mask.shape != (apriori.n_params,):
            raise ConfigError(f"mask needs {apriori.n_params} entries")
        lo, hi = default_bounds(apriori)
        self.lower = lo if lower is None else np.asarray(lower, dtype=float)
        self.upper = hi if upper is None else np.asarray(upper, dtype=float)
        self.cadence = obs.cadence
        # whole cadences of warm-up, limited by the boundary data
        avail = self.start - problem.boundary.start
        n_warm = int(np.floor(min(max(warmup, 0.0), avail) / self.cadence + 1e-9))
        self.sim_start = self.start - n_warm * self.cadence
        n_win = (self.end - self.start) / self.cadence
        if not np.isclose(n_win, round(n_win), atol=1e-6):
            raise ConfigError("window length is not a multiple of the observation cadence")
        self.n_evaluations = 0

    # parameter plumbing
    def full(self, free) -> np.ndarray:
        P = np.array(self.apriori.params, dtype=float)
        P[self.mask] = np.asarray(free, dtype=float)
        return P

    def _window(self, t):
        return (t >= self.start - 1e-9) & (t <= self.end + 1e-9)

    def penalty(self, P) -> float:
        lo, hi = self.lower[self.mask], self.upper[self.mask]
        z = (np.asarray(P, dtype=float)[self.mask] - 0.5 * (lo + hi)) / (0.5 * (hi - lo))
        return PENALTY * (1.0 + float(np.linalg.norm(z)))

    def _residuals(self, grid: SolutionGrid):
        sel = self._window(grid.t_star)
        t = grid.t_star[sel]
        r = sample_at_sensors(grid, self.obs.x_star)[sel] - self.obs.at(t)
        return t, r, sel

    def evaluate(self, P, gradient: bool = False) -> CostEvaluation:
        P = np.asarray(P, dtype=float)
        self.n_evaluations += 1
        model = self.apriori.with_params(P)
        try:
            if gradient:
                grid, fields = solve_sensitivities(self.problem, model, self.sim_start, self.end,
                                                   param_mask=self.mask, cadence=self.cadence,
                                                   init_model=self.apriori)
            else:
                grid = simulate(self.problem, model, self.sim_start, self.end, cadence=self.cadence,
                                init_model=self.apriori)
        except (NumericalError, InvalidParameterError) as exc:
            n = self.obs.n_sensors
            return CostEvaluation(self.penalty(P), np.full(n, np.nan), P, penalized=True,
                                  gradient=np.zeros(int(self.mask.sum())) if gradient else None,
                                  message=str(exc))
        t, r, sel = self._residuals(grid)
        w = self.obs.weights
        contrib = w * _trapezoid(r**2, t, axis=0)
        grad = None
        if gradient:
            X = sensor_sensitivities(fields, self.obs.x_star)[sel]
            grad = np.array([np.sum(w * _trapezoid(2.0 * r * X[:, :, m], t, axis=0))
                             for m in range(X.shape[2])])
        return CostEvaluation(float(np.sum(contrib)), contrib, P, gradient=grad)

    def __call__(self, free) -> float:
        return self.evaluate(self.full(free)).J

    def value_and_grad(self, free):
        ev = self.evaluate(self.full(free), gradient=True)
        return ev.J, ev.gradient


def cost(P, problem: WallProblem, obs: ObservationSet, window, apriori: ConductivityModel,
         warmup: float = 48.0) -> CostEvaluation:
    """One evaluation of J at the full parameter vector ``P``; ``window = (t0, t1)`` in t*."""
    return WindowCost(problem, obs, window[0], window[1], apriori, warmup=warmup).evaluate(P)


# residuals ----------------------------------------------------------------

@dataclass
class ResidualStats:
    sensor: int
    epsilon: np.ndarray = field(repr=False)  # |u_num - u_obs| in degC
    signed: np.ndarray = field(repr=False)
    mean_abs: float
    mean: float
    std: float
    lag1_autocorr: float
    pdf: np.ndarray = field(repr=False)
    bin_edges: np.ndarray = field(repr=False)

    def as_dict(self, with_traces: bool = False) -> dict:
        out = {"sensor": self.sensor, "mean_abs_C": self.mean_abs, "mean_C": self.mean,
               "std_C": self.std, "lag1_autocorr": self.lag1_autocorr,
               "pdf": self.pdf.tolist(), "bin_edges_C": self.bin_edges.tolist()}
        if with_traces:
            out["epsilon_C"] = self.epsilon.tolist()
        return out


def _lag1(r: np.ndarray) -> float:
    d = r - r.mean()
    den = float(d @ d)
    return float(d[1:] @ d[:-1] / den) if den > 0 else 0.0


def residual_stats(t_hours, u_num_C, u_obs_C, bins: int = 30) -> list:
    r = np.asarray(u_num_C, dtype=float) - np.asarray(u_obs_C, dtype=float)
    out = []
    for i in range(r.shape[1]):
        eps = np.abs(r[:, i])
        hi = float(eps.max()) if eps.max() > 0 else 1.0
        pdf, edges = np.histogram(eps, bins=bins, range=(0.0, hi), density=True)
        out.append(ResidualStats(i + 1, eps, r[:, i], float(eps.mean()), float(r[:, i].mean()),
                                 float(r[:, i].std()), _lag1(r[:, i]), pdf, edges))
    return out


def residual_analysis(model: ConductivityModel, problem: WallProblem, obs: ObservationSet, window,
                      scales: ReferenceScales, init_model: Optional[ConductivityModel] = None,
                      warmup: float = 48.0, bins: int = 30):
    """Residual traces and statistics per sensor at the given model.

    Returns ``(t_hours, u_num_C, u_obs_C, stats)``. The simulation warms up
    from the steady profile of ``init_model`` (default ``model``).
    """
    start, end = window
    obs.check_covers(start, end)
    cad = obs.cadence
    avail = start - problem.boundary.start
    sim_start = start - int(np.floor(min(warmup, avail) / cad + 1e-9)) * cad
    grid = simulate(problem, model, sim_start, end, cadence=cad, init_model=init_model or model)
    sel = (grid.t_star >= start - 1e-9) & (grid.t_star <= end + 1e-9)
    t = grid.t_star[sel]
    num = scales.celsius_from_u(sample_at_sensors(grid, obs.x_star)[sel])
    ob = scales.celsius_from_u(obs.at(t))
    return scales.hours_from_tstar(t), num, ob, residual_stats(t, num, ob, bins)


# driver -------------------------------------------------------------------

@dataclass
class EstimationReport:
    kind: str
    param_names: list
    params: np.ndarray
    apriori: np.ndarray
    mask: np.ndarray
    J: float
    trace: list
    switch_log: list
    residuals: list
    runtime_s: float
    n_evaluations: int
    n_iterations: int
    stop_reason: str
    sigma_C: np.ndarray
    window_hours: tuple
    seed: int
    optimizer: dict = field(default_factory=dict)

    def model(self, interfaces, linear_layer: int = 1) -> ConductivityModel:
        return ConductivityModel(self.kind, self.params, interfaces, linear_layer)

    def as_dict(self, scales: Optional[ReferenceScales] = None) -> dict:
        out = {
            "kind": self.kind,
            "param_names": list(self.param_names),
            "P_est": self.params.tolist(),
            "P_apriori": self.apriori.tolist(),
            "mask_free": self.mask.tolist(),
            "J": self.J,
            "J_trace": [float(v) for v in self.trace],
            "switch_log": self.switch_log,
            "residuals": [r.as_dict() for r in self.residuals],
            "runtime_s": self.runtime_s,
            "n_evaluations": self.n_evaluations,
            "n_iterations": self.n_iterations,
            "stop_reason": self.stop_reason,
            "sigma_C": np.asarray(self.sigma_C).tolist(),
            "window_hours": list(self.window_hours),
            "seed": self.seed,
            "optimizer": self.optimizer,
        }
        if scales is not None:
            # k(x) = k_ref * k*(x/L): every coefficient scales with k_ref
            out["P_est_dimensional"] = dict(zip(self.param_names, (self.params * scales.k_ref).tolist()))
            out["P_est_dimensional_units"] = "W/(m K); x-dependent coefficients act on x* = x/L"
        return out


def estimate(problem: WallProblem, obs: ObservationSet, window, apriori: ConductivityModel,
             scales: ReferenceScales, config: Optional[OptimizerConfig] = None, mask=None,
             warmup: float = 48.0, x0=None, use_gradient: bool = True) -> EstimationReport:
    """Minimize J over ``window`` (t0, t1 in t*) with the hybrid optimizer."""
    t_start = time.perf_counter()
    mask = np.ones(apriori.n_params, bool) if mask is None else np.asarray(mask, bool)
    if config is None:
        lo, hi = default_bounds(apriori)
        config = OptimizerConfig(lo, hi)
    if len(config.lower) != apriori.n_params:
        raise ConfigError(f"optimizer bounds need {apriori.n_params} entries")
    wc = WindowCost(problem, obs, window[0], window[1], apriori, mask, config.lower, config.upper,
                    warmup)
    P0 = np.asarray(apriori.params if x0 is None else x0, dtype=float)
    res: OptimizeResult = hybrid_optimize(
        lambda free: wc(free), P0, config,
        grad=(lambda free: wc.value_and_grad(free)) if use_gradient else None, mask=mask)
    if not np.isfinite(res.fun) or res.fun >= PENALTY:
        raise EstimationError("no admissible parameter vector found")
    model = apriori.with_params(res.x)
    _, _, _, stats = residual_analysis(model, problem, obs, window, scales, init_model=apriori,
                                       warmup=warmup)
    runtime = time.perf_counter() - t_start
    log.info("estimate: J=%.6g after %d iterations (%s), %.2fs", res.fun, res.n_iterations,
             res.stop_reason, runtime)
    return EstimationReport(
        kind=apriori.kind, param_names=list(apriori.param_names), params=np.asarray(res.x),
        apriori=np.asarray(apriori.params, dtype=float), mask=mask, J=res.fun, trace=res.trace,
        switch_log=res.switch_log, residuals=stats, runtime_s=runtime,
        n_evaluations=res.n_evaluations, n_iterations=res.n_iterations,
        stop_reason=res.stop_reason, sigma_C=obs.sigma * scales.dT_ref,
        window_hours=tuple(float(v) for v in scales.hours_from_tstar(np.asarray(window))),
        seed=config.seed, optimizer=config.as_dict())
