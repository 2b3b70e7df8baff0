"""Dimensionless 1D conduction with Dirichlet boundaries, Dufort-Frankel in time.

Interior update::

    u_j^{n+1} = nu1 u_{j+1}^n + nu2 u_{j-1}^n + nu3 u_j^{n-1}

    nu1 = lam1 / (1 + lam3)   nu2 = lam2 / (1 + lam3)   nu3 = (1 - lam3) / (1 + lam3)
    lam1 = 2 dt Fo k_{j+1/2} / (c_j dx^2)    lam2 = 2 dt Fo k_{j-1/2} / (c_j dx^2)
    lam3 = dt Fo (k_{j+1/2} + k_{j-1/2}) / (c_j dx^2)

The half-point conductivities are point values at cell midpoints. The first
level is bootstrapped by one forward-Euler step with the same operator and
the boundary data are interpolated linearly in time.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from . import _kernels
from .exceptions import ConfigError, CoverageError, DivergenceError, DomainError, InvalidParameterError
from .wall_model import CapacityModel, ConductivityModel, ReferenceScales

BLOWUP = 1e3


def _frozen(a: np.ndarray) -> np.ndarray:
    # cached grids are shared between calls, so guard them against writes
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpaceGrid:
    n_nodes: int

    def __post_init__(self):
        if self.n_nodes < 3:
            raise ConfigError("grid needs at least 3 nodes")

    @classmethod
    def from_dx(cls, dx_star: float) -> "SpaceGrid":
        n = int(round(1.0 / dx_star)) + 1
        if not np.isclose((n - 1) * dx_star, 1.0, rtol=1e-9):
            raise ConfigError(f"dx* = {dx_star} does not divide [0, 1]")
        return cls(n)

    @property
    def dx(self) -> float:
        return 1.0 / (self.n_nodes - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return _frozen(np.linspace(0.0, 1.0, self.n_nodes))

    @cached_property
    def midpoints(self) -> np.ndarray:
        x = self.x
        return _frozen(0.5 * (x[1:] + x[:-1]))


@dataclass(frozen=True)
class TimeGrid:
    dt_star: float
    start_t_star: float
    end_t_star: float

    def __post_init__(self):
        if not self.dt_star > 0:
            raise ConfigError("dt* must be > 0")
        if self.end_t_star < self.start_t_star:
            raise ConfigError("time window end precedes its start")

    @property
    def n_steps(self) -> int:
        return int(round((self.end_t_star - self.start_t_star) / self.dt_star))

    @cached_property
    def levels(self) -> np.ndarray:
        return _frozen(self.start_t_star + self.dt_star * np.arange(self.n_steps + 1))


@dataclass(frozen=True)
class BoundarySeries:
    """Dimensionless Dirichlet traces u_L (x* = 0) and u_R (x* = 1)."""

    t_star: np.ndarray
    u_left: np.ndarray
    u_right: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_star, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ConfigError("boundary series needs at least two samples")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("boundary times must be strictly increasing")
        for name in ("u_left", "u_right"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != t.shape:
                raise ConfigError(f"boundary {name} has {arr.shape} samples, expected {t.shape}")
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"boundary {name} contains non-finite values")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "t_star", t)

    @classmethod
    def from_celsius(cls, hours, T_out, T_in, scales: ReferenceScales) -> "BoundarySeries":
        return cls(scales.tstar_from_hours(hours), scales.u_from_celsius(T_out),
                   scales.u_from_celsius(T_in))

    @property
    def start(self) -> float:
        return float(self.t_star[0])

    @property
    def end(self) -> float:
        return float(self.t_star[-1])

    def check_covers(self, start: float, end: float):
        tol = 1e-9 * max(1.0, abs(end))
        if start < self.start - tol or end > self.end + tol:
            raise CoverageError(f"boundary data span [{self.start:g}, {self.end:g}] does not cover "
                                f"window [{start:g}, {end:g}] (t*)")

    def interpolate(self, t) -> tuple[np.ndarray, np.ndarray]:
        return np.interp(t, self.t_star, self.u_left), np.interp(t, self.t_star, self.u_right)


@dataclass(frozen=True)
class SolutionGrid:
    """Recorded levels ``u[k, j]`` at times ``t_star[k]`` and nodes ``x_star[j]``."""

    t_star: np.ndarray
    x_star: np.ndarray
    u: np.ndarray
    dt_star: float
    stride: int

    @property
    def final(self) -> np.ndarray:
        return self.u[-1]

    @property
    def dx(self) -> float:
        return float(self.x_star[1] - self.x_star[0])


@dataclass(frozen=True)
class DFCoefficients:
    lam1: np.ndarray
    lam2: np.ndarray
    lam3: np.ndarray

    @property
    def nu1(self) -> np.ndarray:
        return self.lam1 / (1.0 + self.lam3)

    @property
    def nu2(self) -> np.ndarray:
        return self.lam2 / (1.0 + self.lam3)

    @property
    def nu3(self) -> np.ndarray:
        return (1.0 - self.lam3) / (1.0 + self.lam3)


@dataclass(frozen=True)
class WallProblem:
    """Everything the forward model needs except the conductivity."""

    capacity: CapacityModel
    fourier: float
    boundary: BoundarySeries
    space: SpaceGrid
    dt_star: float = 0.01
    blowup: float = BLOWUP

    @cached_property
    def c_nodes(self) -> np.ndarray:
        return _frozen(nodal_capacity(self.capacity, self.space))

    def coefficients(self, kmodel: ConductivityModel) -> DFCoefficients:
        k_mid = half_point_conductivity(kmodel, self.space)
        return df_coefficients(k_mid, self.c_nodes, self.fourier, self.space.dx, self.dt_star)


def half_point_conductivity(kmodel: ConductivityModel, space: SpaceGrid) -> np.ndarray:
    """k* at the cell midpoints (x_j + x_{j+1}) / 2, j = 0..N_x-2."""
    return kmodel.evaluate(space.midpoints)


def nodal_capacity(cmodel: CapacityModel, space: SpaceGrid) -> np.ndarray:
    """c*_j as the mean over the two half cells adjacent to node j."""
    x = space.x
    h = 0.5 * space.dx
    left = cmodel.evaluate(np.clip(x - h, 0.0, 1.0))
    right = cmodel.evaluate(np.clip(x + h, 0.0, 1.0))
    return 0.5 * (left + right)


def df_coefficients(k_mid, c_nodes, fourier: float, dx: float, dt: float) -> DFCoefficients:
    """lambda_1..3 per node from midpoint conductivities (length N_x-1) and nodal c*."""
    k_mid = np.asarray(k_mid, dtype=float)
    c_nodes = np.asarray(c_nodes, dtype=float)
    n = len(c_nodes)
    if len(k_mid) != n - 1:
        raise ConfigError("k_mid must have one entry fewer than c_nodes")
    k_plus = np.zeros(n)
    k_minus = np.zeros(n)
    k_plus[:-1] = k_mid
    k_minus[1:] = k_mid
    r = dt * fourier / (c_nodes * dx * dx)
    return DFCoefficients(lam1=2 * r * k_plus, lam2=2 * r * k_minus, lam3=r * (k_plus + k_minus))


def df_step(u_prev, u_curr, coeffs: DFCoefficients, left: float, right: float) -> np.ndarray:
    """One Dufort-Frankel step from levels n-1 and n to level n+1."""
    u_prev = np.asarray(u_prev, dtype=float)
    u_curr = np.asarray(u_curr, dtype=float)
    nu1, nu2, nu3 = coeffs.nu1, coeffs.nu2, coeffs.nu3
    out = np.empty_like(u_curr)
    out[1:-1] = nu1[1:-1] * u_curr[2:] + nu2[1:-1] * u_curr[:-2] + nu3[1:-1] * u_prev[1:-1]
    out[0] = left
    out[-1] = right
    if np.all(nu1[1:-1] >= 0) and np.all(nu2[1:-1] >= 0) and np.all(nu3[1:-1] >= 0):
        # convex combination of stencil inputs
        lo = np.minimum(np.minimum(u_curr[2:], u_curr[:-2]), u_prev[1:-1])
        hi = np.maximum(np.maximum(u_curr[2:], u_curr[:-2]), u_prev[1:-1])
        slack = 1e-12 * max(1.0, float(np.max(np.abs(u_curr))))
        assert np.all(out[1:-1] >= lo - slack) and np.all(out[1:-1] <= hi + slack)
    return out


def steady_state_init(kmodel: ConductivityModel, cmodel: Optional[CapacityModel], u_left0: float,
                      u_right0: float, space: SpaceGrid) -> np.ndarray:
    """Discrete solution of d/dx*(k* du/dx*) = 0 with the given end values.

    ``cmodel`` does not enter the steady problem; it is accepted to keep the
    signature parallel to the transient solver.
    """
    return _steady_profile(half_point_conductivity(kmodel, space), u_left0, u_right0)


def _steady_profile(k_mid: np.ndarray, u_left0: float, u_right0: float) -> np.ndarray:
    if not np.all(k_mid > 0):
        raise InvalidParameterError("steady-state system is singular: k* <= 0")
    n = len(k_mid) + 1
    m = n - 2
    # interior rows: k_- u_{j-1} - (k_- + k_+) u_j + k_+ u_{j+1} = 0
    ab = np.zeros((3, m))
    ab[0, 1:] = k_mid[1:m]
    ab[1, :] = -(k_mid[:m] + k_mid[1:m + 1])
    ab[2, :-1] = k_mid[1:m]
    rhs = np.zeros(m)
    rhs[0] -= k_mid[0] * u_left0
    rhs[-1] -= k_mid[m] * u_right0
    u = np.empty(n)
    u[0] = u_left0
    u[-1] = u_right0
    u[1:-1] = solve_banded((1, 1), ab, rhs, check_finite=False)
    return u


def _record_stride(cadence: Optional[float], dt: float) -> int:
    if cadence is None:
        return 1
    if cadence < dt * (1 - 1e-9):
        raise ConfigError(f"record cadence {cadence:g} is finer than dt* = {dt:g}")
    stride = int(round(cadence / dt))
    if abs(stride * dt - cadence) > 1e-9 * abs(cadence):
        raise ConfigError(f"record cadence {cadence:g} is not a multiple of dt* = {dt:g}")
    return stride


def _prepare(problem: WallProblem, kmodel: ConductivityModel, start: float, end: float,
             initial, init_model, cadence):
    time = TimeGrid(problem.dt_star, start, end)
    levels = time.levels
    problem.boundary.check_covers(start, levels[-1])
    u_left, u_right = problem.boundary.interpolate(levels)
    k_mid = half_point_conductivity(kmodel, problem.space)
    coeffs = df_coefficients(k_mid, problem.c_nodes, problem.fourier, problem.space.dx,
                             problem.dt_star)
    if initial is None:
        if init_model is not None and init_model is not kmodel:
            k_mid = half_point_conductivity(init_model, problem.space)
        initial = _steady_profile(k_mid, u_left[0], u_right[0])
    else:
        initial = np.array(initial, dtype=float)
        if initial.shape != (problem.space.n_nodes,):
            raise ConfigError("initial profile does not match the space grid")
    stride = _record_stride(cadence, problem.dt_star)
    if time.n_steps % stride:
        raise ConfigError("window length is not a multiple of the record cadence")
    return time, u_left, u_right, coeffs, initial, stride


def simulate(problem: WallProblem, kmodel: ConductivityModel, start: float, end: float,
             cadence: Optional[float] = 1.0, initial=None,
             init_model: Optional[ConductivityModel] = None) -> SolutionGrid:
    """March from ``start`` to ``end`` (t*), recording every ``cadence`` (None: every step).

    The initial state is ``initial`` if given, else the steady profile of
    ``init_model`` (default: ``kmodel``) under the boundary values at ``start``.
    """
    time, u_left, u_right, co, u0, stride = _prepare(problem, kmodel, start, end, initial,
                                                     init_model, cadence)
    n_rec = time.n_steps // stride + 1
    out = np.empty((n_rec, problem.space.n_nodes))
    status = _kernels.march(u0, u_left, u_right, 0.5 * co.lam1, 0.5 * co.lam2, co.nu1, co.nu2,
                            co.nu3, stride, out, problem.blowup)
    if status >= 0:
        raise DivergenceError(f"solution exceeded |u| > {problem.blowup:g} at step {status} "
                              f"(t* = {start + status * problem.dt_star:g})", step=status)
    return SolutionGrid(time.levels[::stride], problem.space.x, out, problem.dt_star, stride)


def _interp_weights(x_nodes: np.ndarray, xs) -> tuple[np.ndarray, np.ndarray]:
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < -1e-12) or np.any(xs > 1 + 1e-12):
        raise DomainError("sensor position outside [0, 1]")
    dx = x_nodes[1] - x_nodes[0]
    pos = np.clip(xs, 0.0, 1.0) / dx
    j = np.floor(pos + 1e-9).astype(int)
    j = np.clip(j, 0, len(x_nodes) - 2)
    w = np.clip(pos - j, 0.0, 1.0)
    w[np.abs(w) < 1e-9] = 0.0
    return j, w


def sample_at_sensors(grid: SolutionGrid, x_star, cadence: Optional[float] = None) -> np.ndarray:
    """Linearly interpolated traces, shape (n_times, n_sensors).

    ``cadence`` (t*) subsamples the recorded levels; it must be a multiple of
    the recording interval.
    """
    j, w = _interp_weights(grid.x_star, x_star)
    u = grid.u
    if cadence is not None:
        rec_dt = grid.dt_star * grid.stride
        if cadence < rec_dt * (1 - 1e-9):
            raise ConfigError(f"cadence {cadence:g} is finer than the recorded interval {rec_dt:g}")
        step = int(round(cadence / rec_dt))
        if not np.isclose(step * rec_dt, cadence, rtol=1e-9):
            raise ConfigError("cadence is not a multiple of the recorded interval")
        u = u[::step]
    return u[..., j] * (1 - w) + u[..., j + 1] * w


def sensor_gradient(grid: SolutionGrid, x_star) -> np.ndarray:
    """du/dx* at the sensors from nodal central differences, linearly interpolated."""
    u = grid.u
    g = np.gradient(u, grid.dx, axis=-1)
    j, w = _interp_weights(grid.x_star, x_star)
    return g[..., j] * (1 - w) + g[..., j + 1] * w
