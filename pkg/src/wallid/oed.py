"""D-optimal selection of the measurement window.

For a plan starting at ``t_ini`` with duration ``delta_tau`` the modified
Fisher matrix is::

    F_ij = 1/sigma^2 * sum_q 1/delta_tau * integral X_i(chi_q, t) X_j(chi_q, t) dt

and the plan maximizing ``Psi = det F`` is preferred. Each window is
simulated from its own start (steady initial state, zero sensitivities);
the first ``spinup_hours`` of the window are left out of the integral while
the normalization keeps the full window length.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import ConfigError, CoverageError, NumericalError
from .heat_solver import WallProblem
from .sensitivity import sensor_sensitivities, solve_sensitivities
from .wall_model import ConductivityModel, ReferenceScales

log = logging.getLogger(__name__)

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class MeasurementPlan:
    t_ini: float  # days
    duration: float  # days
    cadence: float = 1.0  # hours

    def __post_init__(self):
        if self.t_ini < 0:
            raise ConfigError("plan t_ini must be >= 0")
        if not self.duration > 0:
            raise ConfigError("plan duration must be > 0")
        if not self.cadence > 0:
            raise ConfigError("plan cadence must be > 0")

    @property
    def start_hours(self) -> float:
        return 24.0 * self.t_ini

    @property
    def end_hours(self) -> float:
        return 24.0 * (self.t_ini + self.duration)


@dataclass(frozen=True)
class FisherMatrix:
    entries: np.ndarray
    plan: MeasurementPlan
    sigma: float
    param_names: tuple = ()

    @property
    def n_params(self) -> int:
        return self.entries.shape[0]

    def correlation(self) -> np.ndarray:
        d = np.sqrt(np.diag(self.entries))
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.entries / np.outer(d, d)

    def rank(self, rtol: float = 1e-10) -> int:
        w = np.linalg.eigvalsh(self.entries)
        scale = max(float(np.max(np.abs(w))), 0.0)
        if scale == 0.0:
            return 0
        return int(np.sum(w > rtol * scale))


def fisher_matrix(traces, times_hours, plan: MeasurementPlan, sigma: float,
                  spinup_hours: float = 12.0, param_names: Sequence[str] = ()) -> FisherMatrix:
    """Modified Fisher matrix from sensor sensitivity traces.

    ``traces`` has shape ``(n_times, n_sensors, n_params)`` sampled at
    ``times_hours``. Trapezoidal integration over
    ``[t_ini + spinup, t_ini + duration]``, divided by the duration.
    """
    if not sigma > 0:
        raise ConfigError("sigma must be > 0")
    traces = np.asarray(traces, dtype=float)
    if traces.ndim == 2:
        traces = traces[:, None, :]
    t = np.asarray(times_hours, dtype=float)
    lo, hi = plan.start_hours, plan.end_hours
    tol = 1e-9 * max(1.0, hi)
    if t[0] > lo + tol or t[-1] < hi - tol:
        raise CoverageError(f"sensitivity traces [{t[0]:g}, {t[-1]:g}] h do not cover plan "
                            f"[{lo:g}, {hi:g}] h")
    sel = (t >= lo + spinup_hours - tol) & (t <= hi + tol)
    ts, xs = t[sel], traces[sel]
    n_p = traces.shape[2]
    F = np.zeros((n_p, n_p))
    for i in range(n_p):
        for j in range(i, n_p):
            if len(ts) > 1:
                F[i, j] = _trapezoid(np.sum(xs[:, :, i] * xs[:, :, j], axis=1), ts)
            F[j, i] = F[i, j]
    F /= 24.0 * plan.duration * sigma**2
    return FisherMatrix(F, plan, sigma, tuple(param_names))


def d_criterion(F, return_flag: bool = False):
    """det F by LU with partial pivoting; round-off negatives are clamped to 0."""
    entries = F.entries if isinstance(F, FisherMatrix) else np.asarray(F, dtype=float)
    psi = float(np.linalg.det(entries))
    clamped = False
    if psi < 0:
        scale = float(np.prod(np.abs(np.diag(entries)))) if entries.size else 0.0
        if abs(psi) <= 1e-8 * max(scale, np.finfo(float).tiny):
            clamped = True
            psi = 0.0
        else:
            warnings.warn(f"Fisher determinant is negative ({psi:.3e}); matrix is not PSD")
    return (psi, clamped) if return_flag else psi


@dataclass
class WindowResult:
    plan: MeasurementPlan
    psi: float
    rank: int
    failed: bool = False
    clamped: bool = False
    message: str = ""
    fisher: Optional[FisherMatrix] = field(default=None, repr=False)


@dataclass
class ScanResult:
    duration: float
    windows: list

    @property
    def valid(self) -> list:
        return [w for w in self.windows if not w.failed]

    @property
    def argmax(self) -> WindowResult:
        return max(self.valid, key=lambda w: w.psi)

    @property
    def argmin(self) -> WindowResult:
        return min(self.valid, key=lambda w: w.psi)

    @property
    def max_psi(self) -> float:
        return self.argmax.psi

    @property
    def failed(self) -> list:
        return [w for w in self.windows if w.failed]

    @property
    def degenerate(self) -> bool:
        """True when no window carries information (Psi = 0 up to round-off)."""
        valid = self.valid
        return not valid or max(w.psi for w in valid) <= 1e-30


def window_starts(span_days: float, duration: float, sliding: bool = False) -> np.ndarray:
    """Start days of non-overlapping windows (or daily-sliding ones)."""
    if duration > span_days:
        raise CoverageError(f"data span of {span_days:g} days is shorter than a {duration:g}-day window")
    if sliding:
        return np.arange(0.0, np.floor(span_days - duration) + 1.0)
    n = int(np.floor(span_days / duration + 1e-9))
    return duration * np.arange(n)


def evaluate_window(problem: WallProblem, kmodel: ConductivityModel, scales: ReferenceScales,
                    x_sensors, plan: MeasurementPlan, sigma: float, mask=None,
                    spinup_hours: float = 12.0) -> WindowResult:
    t0 = float(scales.tstar_from_hours(plan.start_hours))
    t1 = float(scales.tstar_from_hours(plan.end_hours))
    cadence = float(scales.tstar_from_hours(plan.cadence))
    try:
        _, fields = solve_sensitivities(problem, kmodel, t0, t1, param_mask=mask, cadence=cadence)
    except NumericalError as exc:
        return WindowResult(plan, float("nan"), 0, failed=True, message=str(exc))
    traces = sensor_sensitivities(fields, x_sensors)
    hours = scales.hours_from_tstar(fields[0].t_star)
    F = fisher_matrix(traces, hours, plan, sigma, spinup_hours, [f.name for f in fields])
    psi, clamped = d_criterion(F, return_flag=True)
    return WindowResult(plan, psi, F.rank(), clamped=clamped, fisher=F)


def scan_windows(problem: WallProblem, kmodel: ConductivityModel, scales: ReferenceScales, x_sensors,
                 durations: Sequence[float] = (1, 3, 7), sigma: float = 1.0, mask=None,
                 spinup_hours: float = 12.0, sliding: bool = False, cadence_hours: float = 1.0,
                 threads: int = 1) -> dict:
    """Psi for every window of every duration; returns ``{duration: ScanResult}``.

    Only the boundary data and the a-priori ``kmodel`` are needed. Diverged
    windows are kept in the result flagged as failed.
    """
    bounds = problem.boundary
    first_day = float(scales.hours_from_tstar(bounds.start)) / 24.0
    span_days = float(scales.hours_from_tstar(bounds.end - bounds.start)) / 24.0
    results = {}
    for duration in durations:
        plans = [MeasurementPlan(first_day + s, float(duration), cadence_hours)
                 for s in window_starts(span_days, float(duration), sliding)]

        def job(plan):
            return evaluate_window(problem, kmodel, scales, x_sensors, plan, sigma, mask, spinup_hours)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                windows = list(pool.map(job, plans))
        else:
            windows = [job(p) for p in plans]
        scan = ScanResult(float(duration), windows)
        for w in scan.failed:
            log.warning("window t_ini=%g d (%g d) failed: %s", w.plan.t_ini, duration, w.message)
        results[float(duration)] = scan
    return results
