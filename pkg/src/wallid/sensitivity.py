"""Direct-differentiation sensitivities X_m = du/dP_m.

Differentiating ``c* u_t = Fo (k* u_x)_x`` with respect to P_m gives::

    c* X_t = Fo (k* X_x)_x + Fo (dk*/dP_m u_x)_x

The fields are the exact derivative of the discrete Dufort-Frankel march:
the diffusive part uses the forward stencil and the source differentiates
lambda_1..3, so it involves u at levels n-1, n and n+1. X starts at
zero (the initial state is held at the reference model's steady profile)
and vanishes on both Dirichlet boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .exceptions import ConfigError, DivergenceError
from .heat_solver import SolutionGrid, WallProblem, _prepare, sample_at_sensors, simulate
from .wall_model import ConductivityModel


@dataclass(frozen=True)
class SensitivityField:
    param_index: int
    name: str
    t_star: np.ndarray
    x_star: np.ndarray
    X: np.ndarray

    def at(self, x_star) -> np.ndarray:
        grid = SolutionGrid(self.t_star, self.x_star, self.X, 0.0, 1)
        return sample_at_sensors(grid, x_star)


def _source_coefficients(problem: WallProblem, kmodel: ConductivityModel, indices):
    space = problem.space
    c = problem.c_nodes
    r = problem.dt_star * problem.fourier / (c * space.dx**2)
    mid = space.midpoints
    g1 = np.zeros((len(indices), space.n_nodes))
    g2 = np.zeros_like(g1)
    for row, m in enumerate(indices):
        g = kmodel.dparam(m, mid)
        g1[row, :-1] = 2 * r[:-1] * g
        g2[row, 1:] = 2 * r[1:] * g
    return g1, g2


def solve_sensitivities(problem: WallProblem, kmodel: ConductivityModel, start: float, end: float,
                        param_mask: Optional[Sequence[bool]] = None, cadence: Optional[float] = 1.0,
                        init_model: Optional[ConductivityModel] = None, initial=None):
    """Co-advance u and the sensitivity fields of all unmasked parameters.

    Returns ``(u_grid, fields)`` with one SensitivityField per free parameter.
    """
    mask = np.ones(kmodel.n_params, bool) if param_mask is None else np.asarray(param_mask, bool)
    if mask.shape != (kmodel.n_params,):
        raise ConfigError(f"parameter mask needs {kmodel.n_params} entries")
    indices = np.flatnonzero(mask)
    if len(indices) == 0:
        raise ConfigError("all parameters are masked: no sensitivities to compute")
    time, u_left, u_right, co, u0, stride = _prepare(problem, kmodel, start, end, initial,
                                                     init_model, cadence)
    g1, g2 = _source_coefficients(problem, kmodel, indices)
    n_rec = time.n_steps // stride + 1
    out_u = np.empty((n_rec, problem.space.n_nodes))
    out_x = np.empty((n_rec, len(indices), problem.space.n_nodes))
    status = _kernels.march_sensitivity(u0, u_left, u_right, 0.5 * co.lam1, 0.5 * co.lam2,
                                        co.nu1, co.nu2, co.nu3, 1.0 / (1.0 + co.lam3), g1, g2,
                                        stride, out_u, out_x, problem.blowup)
    if status >= 0:
        raise DivergenceError(f"sensitivity solve diverged at step {status}", step=status)
    t = time.levels[::stride]
    grid = SolutionGrid(t, problem.space.x, out_u, problem.dt_star, stride)
    names = kmodel.param_names
    fields = [SensitivityField(int(m), names[m], t, problem.space.x, out_x[:, row, :])
              for row, m in enumerate(indices)]
    return grid, fields


def sensor_sensitivities(fields: Sequence[SensitivityField], x_star) -> np.ndarray:
    """Traces at the sensors, shape (n_times, n_sensors, n_params)."""
    return np.stack([f.at(x_star) for f in fields], axis=-1)


def fd_sensitivity_oracle(problem: WallProblem, kmodel: ConductivityModel, param_index: int,
                          start: float, end: float, rel_step: float = 1e-4,
                          cadence: Optional[float] = 1.0,
                          init_model: Optional[ConductivityModel] = None) -> SensitivityField:
    """Central finite difference of the forward solution in P_index.

    Both perturbed runs start from the same initial state (steady profile of
    ``init_model``, default the unperturbed model), matching X(t0) = 0.
    """
    if not 1e-6 <= rel_step <= 1e-2:
        raise ConfigError("rel_step must lie in [1e-6, 1e-2]")
    P = np.asarray(kmodel.params)
    h = rel_step * max(abs(P[param_index]), 1.0)
    base = init_model or kmodel
    runs = []
    for sign in (1.0, -1.0):
        Q = P.copy()
        Q[param_index] += sign * h
        runs.append(simulate(problem, kmodel.with_params(Q), start, end, cadence=cadence,
                             init_model=base))
    X = (runs[0].u - runs[1].u) / (2 * h)
    return SensitivityField(param_index, kmodel.param_names[param_index], runs[0].t_star,
                            runs[0].x_star, X)
