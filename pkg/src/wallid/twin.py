"""Synthetic twin: seeded boundary climate, refined-grid truth and noisy sensors.

Outdoor temperature is an annual sinusoid plus a daily sinusoid whose
amplitude is multiplied during a designated cold snap, plus white noise.
Indoor temperature is a constant with a small daily swing. Observations are
generated on a grid refined by ``refine`` in both x* and t* so that the
estimator never sees its own discretization.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .exceptions import NumericalError
from .heat_solver import BoundarySeries, SpaceGrid, WallProblem, sample_at_sensors, simulate
from .wall_model import (LINEAR, PIECEWISE, QUADRATIC, ConductivityModel, ReferenceScales,
                         SensorArray, WallSpec, nondimensionalize)

# conductivities recovered on the field campaign, used as default truths
DEFAULT_TRUTH = {
    PIECEWISE: (0.75, 1.01, None),
    LINEAR: (0.8336, -0.714, 2.639, None),
    QUADRATIC: (1.3952, -3.8249, 4.4296),
}


@dataclass
class SyntheticTwinSpec:
    truth_kind: str = PIECEWISE
    truth_params: Optional[tuple] = None
    days: int = 365
    annual_mean: float = 12.0
    annual_amplitude: float = 8.0
    coldest_day: float = 35.0
    daily_amplitude: float = 5.0
    snap_factor: float = 2.0
    snap_start_day: float = 24.0
    snap_days: float = 21.0
    boundary_noise: float = 0.3
    indoor_mean: float = 20.0
    indoor_daily_amplitude: float = 1.0
    obs_noise: float = 0.5
    refine: int = 2
    seed: int = 0

    @property
    def snap_interval(self) -> tuple[float, float]:
        return self.snap_start_day, self.snap_start_day + self.snap_days

    @property
    def low_season(self) -> tuple[float, float]:
        """Days within two months of the warmest day (smallest indoor-outdoor gap)."""
        warm = self.coldest_day + 182.5
        return warm - 60.0, warm + 60.0

    def as_dict(self) -> dict:
        return asdict(self)


def boundary_signal(spec: SyntheticTwinSpec, rng: np.random.Generator):
    """Hourly ``(hours, T_out, T_in)`` in degC covering ``spec.days`` days."""
    hours = np.arange(0, 24 * spec.days + 1, dtype=float)
    day = hours / 24.0
    annual = spec.annual_mean - spec.annual_amplitude * np.cos(2 * np.pi * (day - spec.coldest_day) / 365.0)
    lo, hi = spec.snap_interval
    amp = np.where((day >= lo) & (day < hi), spec.daily_amplitude * spec.snap_factor,
                   spec.daily_amplitude)
    # daily peak mid-afternoon
    daily = amp * np.sin(2 * np.pi * (hours - 9.0) / 24.0)
    T_out = annual + daily + spec.boundary_noise * rng.standard_normal(hours.shape)
    T_in = spec.indoor_mean + spec.indoor_daily_amplitude * np.sin(2 * np.pi * (hours - 12.0) / 24.0)
    return hours, T_out, T_in


def truth_model(spec: SyntheticTwinSpec, apriori: ConductivityModel) -> ConductivityModel:
    """True conductivity; ``None`` slots take the a-priori layer value."""
    params = spec.truth_params if spec.truth_params is not None else DEFAULT_TRUTH[spec.truth_kind]
    params = list(params)
    if spec.truth_kind == PIECEWISE:
        params = [apriori.params[i] if p is None else p for i, p in enumerate(params)]
    elif spec.truth_kind == LINEAR:
        last = apriori.params[-1]
        params = [last if p is None else p for p in params]
    return ConductivityModel(spec.truth_kind, params, apriori.interfaces)


@dataclass
class TwinData:
    hours: np.ndarray
    T_out: np.ndarray
    T_in: np.ndarray
    obs_clean: np.ndarray
    obs: np.ndarray
    truth: ConductivityModel
    scales: ReferenceScales
    spec: SyntheticTwinSpec = field(repr=False)

    def truth_dict(self) -> dict:
        return {"truth": self.truth.as_dict(), "scales": self.scales.as_dict(),
                "twin": self.spec.as_dict()}


def generate_twin(spec: SyntheticTwinSpec, wall: WallSpec, sensors: SensorArray,
                  dx_star: float = 0.01, dt_star: float = 0.01, t_ref: float = 3600.0) -> TwinData:
    rng = np.random.default_rng(spec.seed)
    hours, T_out, T_in = boundary_signal(spec, rng)
    scales = ReferenceScales.default(wall, np.concatenate([T_out, T_in]), t_ref=t_ref)
    apriori, cmodel, _ = nondimensionalize(wall, scales)
    truth = truth_model(spec, apriori)
    truth.check_positive()
    bounds = BoundarySeries.from_celsius(hours, T_out, T_in, scales)
    space = SpaceGrid(spec.refine * (int(round(1 / dx_star))) + 1)
    problem = WallProblem(cmodel, scales.fourier, bounds, space, dt_star / spec.refine)
    cadence = float(scales.tstar_from_hours(1.0))
    try:
        grid = simulate(problem, truth, bounds.start, bounds.end, cadence=cadence)
    except NumericalError as exc:
        raise NumericalError(f"twin generation failed on the refined grid: {exc}") from exc
    xs = np.asarray(sensors.positions) / scales.L_ref
    clean = scales.celsius_from_u(sample_at_sensors(grid, xs))
    noisy = clean + spec.obs_noise * rng.standard_normal(clean.shape)
    return TwinData(hours, T_out, T_in, clean, noisy, truth, scales, spec)
