"""Switching hybrid optimizer for bound-constrained minimization.

Six constituent methods share one best-so-far state and are run in a fixed
roster, by default::

    DE -> quasi-Newton (BFGS) -> Nelder-Mead -> GA -> DFP -> SQP (projected)

A method hands over to the next one when the best cost has improved by less
than ``stall_tol`` (relative) over ``stall_window`` iterations, or when it
declares itself converged. The run stops when

1. the iteration or evaluation budget is spent,
2. the best cost reaches ``target_cost``, or
3. a full roster pass brings no relative decrease above ``pass_tol``.

All methods work in coordinates normalized to the unit box, with one seeded
``numpy.random.Generator`` so a fixed seed reproduces the run exactly.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import lsq_linear

from .exceptions import ConfigError, EstimationError

log = logging.getLogger(__name__)

# costs at or above this value are penalties for failed evaluations
PENALTY = 1e12

ROSTER = ("de", "quasi_newton", "nelder_mead", "ga", "dfp", "sqp")


@dataclass
class OptimizerConfig:
    lower: Sequence[float]
    upper: Sequence[float]
    de_population_factor: int = 10
    ga_population_factor: int = 20
    max_iterations: int = 500
    max_evaluations: int = 20000
    stall_tol: float = 1e-6
    stall_window: int = 10
    pass_tol: float = 1e-6
    roster: Sequence[str] = ROSTER
    target_cost: Optional[float] = None
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ConfigError("bounds: lower and upper differ in length")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ConfigError("bounds must be finite")
        if np.any(self.lower >= self.upper):
            raise ConfigError("bounds: every lower bound must be below its upper bound")
        unknown = set(self.roster) - set(ROSTER)
        if unknown:
            raise ConfigError(f"unknown optimizer(s) in roster: {sorted(unknown)}")
        if not self.roster:
            raise ConfigError("optimizer roster is empty")

    def as_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "de_population_factor": self.de_population_factor,
                "ga_population_factor": self.ga_population_factor,
                "max_iterations": self.max_iterations, "max_evaluations": self.max_evaluations,
                "stall_tol": self.stall_tol, "stall_window": self.stall_window,
                "pass_tol": self.pass_tol, "roster": list(self.roster),
                "target_cost": self.target_cost, "seed": self.seed}


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    trace: list = field(default_factory=list)
    switch_log: list = field(default_factory=list)
    n_evaluations: int = 0
    n_iterations: int = 0
    n_penalties: int = 0
    stop_reason: str = ""


class _Budget(Exception):
    pass


class _Objective:
    """Counts evaluations and tracks the best non-penalized point (unit-box coordinates)."""

    def __init__(self, fun, grad, lower, upper, max_evaluations, threads=1):
        self.fun = fun
        self.grad_fun = grad
        self.lower = lower
        self.span = upper - lower
        self.max_evaluations = max_evaluations
        self.threads = threads
        self.n_eval = 0
        self.n_penalties = 0
        self.best_z = None
        self.best_f = np.inf

    def to_x(self, z):
        return self.lower + self.span * np.clip(z, 0.0, 1.0)

    def _record(self, z, f):
        if not np.isfinite(f) or f >= PENALTY:
            self.n_penalties += 1
            return PENALTY if not np.isfinite(f) else f
        if f < self.best_f:
            self.best_f = float(f)
            self.best_z = np.array(z, dtype=float)
        return f

    def _reserve(self, n):
        if self.n_eval + n > self.max_evaluations:
            raise _Budget()
        self.n_eval += n

    def __call__(self, z):
        self._reserve(1)
        return self._record(z, float(self.fun(self.to_x(z))))

    def batch(self, Z):
        self._reserve(len(Z))
        xs = [self.to_x(z) for z in Z]
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                fs = list(pool.map(self.fun, xs))
        else:
            fs = [self.fun(x) for x in xs]
        return np.array([self._record(z, float(f)) for z, f in zip(Z, fs)])

    def value_and_grad(self, z):
        """Cost and gradient with respect to z."""
        if self.grad_fun is not None:
            self._reserve(1)
            f, g = self.grad_fun(self.to_x(z))
            f = self._record(z, float(f))
            return f, np.asarray(g, dtype=float) * self.span
        f = self(z)
        h = 1e-6
        g = np.zeros_like(z)
        for i in range(len(z)):
            zp, zm = z.copy(), z.copy()
            zp[i] = min(z[i] + h, 1.0)
            zm[i] = max(z[i] - h, 0.0)
            g[i] = (self(zp) - self(zm)) / (zp[i] - zm[i])
        return f, g


def _projected_gradient(z, g):
    pg = g.copy()
    pg[(z <= 0.0) & (g > 0)] = 0.0
    pg[(z >= 1.0) & (g < 0)] = 0.0
    return pg


class _Method:
    name = ""

    def __init__(self, obj: _Objective, rng: np.random.Generator, cfg: OptimizerConfig):
        self.obj = obj
        self.rng = rng
        self.cfg = cfg
        self.n = len(obj.best_z)

    def step(self) -> bool:  # pragma: no cover - interface
        raise NotImplementedError


class _Population(_Method):
    factor_attr = ""

    def __init__(self, obj, rng, cfg):
        super().__init__(obj, rng, cfg)
        size = max(5, getattr(cfg, self.factor_attr) * self.n)
        pop = rng.random((size, self.n))
        pop[0] = obj.best_z
        self.pop = pop
        self.fit = obj.batch(pop)


class DifferentialEvolution(_Population):
    """DE/rand/1/bin with dithered scale factor."""

    name = "de"
    factor_attr = "de_population_factor"
    cr = 0.9

    def step(self):
        size = len(self.pop)
        F = self.rng.uniform(0.5, 1.0)
        trials = np.empty_like(self.pop)
        for i in range(size):
            choices = self.rng.choice(size - 1, 3, replace=False)
            a, b, c = self.pop[np.where(choices >= i, choices + 1, choices)]
            mutant = a + F * (b - c)
            # out-of-box components land between the parent and the violated bound
            mutant = np.where(mutant < 0.0, 0.5 * self.pop[i], mutant)
            mutant = np.where(mutant > 1.0, 0.5 * (1.0 + self.pop[i]), mutant)
            cross = self.rng.random(self.n) < self.cr
            cross[self.rng.integers(self.n)] = True
            trials[i] = np.where(cross, mutant, self.pop[i])
        f_trial = self.obj.batch(trials)
        better = f_trial <= self.fit
        self.pop[better] = trials[better]
        self.fit[better] = f_trial[better]
        return False


class GeneticAlgorithm(_Population):
    """Real-coded GA: binary tournaments, BLX-0.5 crossover, Gaussian mutation, elitism."""

    name = "ga"
    factor_attr = "ga_population_factor"
    n_elite = 2

    def __init__(self, obj, rng, cfg):
        super().__init__(obj, rng, cfg)
        self.sigma = 0.1

    def _tournament(self):
        i, j = self.rng.integers(len(self.pop), size=2)
        return self.pop[i] if self.fit[i] <= self.fit[j] else self.pop[j]

    def step(self):
        size = len(self.pop)
        order = np.argsort(self.fit, kind="stable")
        elite = self.pop[order[: self.n_elite]].copy()
        elite_fit = self.fit[order[: self.n_elite]].copy()
        children = np.empty((size - self.n_elite, self.n))
        for k in range(len(children)):
            p, q = self._tournament(), self._tournament()
            if self.rng.random() < 0.9:
                lo, hi = np.minimum(p, q), np.maximum(p, q)
                ext = 0.5 * (hi - lo)
                child = self.rng.uniform(lo - ext, hi + ext)
            else:
                child = p.copy()
            mutate = self.rng.random(self.n) < max(1.0 / self.n, 0.2)
            child = child + mutate * self.sigma * self.rng.standard_normal(self.n)
            children[k] = np.clip(child, 0.0, 1.0)
        f_children = self.obj.batch(children)
        self.pop = np.vstack([elite, children])
        self.fit = np.concatenate([elite_fit, f_children])
        self.sigma = max(0.98 * self.sigma, 1e-3)
        return False


class NelderMead(_Method):
    name = "nelder_mead"

    def __init__(self, obj, rng, cfg):
        super().__init__(obj, rng, cfg)
        x0 = obj.best_z
        simplex = [x0]
        for i in range(self.n):
            v = x0.copy()
            v[i] = v[i] + 0.05 if v[i] + 0.05 <= 1.0 else v[i] - 0.05
            simplex.append(v)
        self.simplex = np.array(simplex)
        self.fs = obj.batch(self.simplex)

    def step(self):
        order = np.argsort(self.fs, kind="stable")
        self.simplex, self.fs = self.simplex[order], self.fs[order]
        if np.max(np.abs(self.simplex[1:] - self.simplex[0])) < 1e-10:
            return True
        centroid = self.simplex[:-1].mean(axis=0)
        worst = self.simplex[-1]
        xr = np.clip(centroid + (centroid - worst), 0.0, 1.0)
        fr = self.obj(xr)
        if fr < self.fs[0]:
            xe = np.clip(centroid + 2.0 * (centroid - worst), 0.0, 1.0)
            fe = self.obj(xe)
            self.simplex[-1], self.fs[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < self.fs[-2]:
            self.simplex[-1], self.fs[-1] = xr, fr
        else:
            if fr < self.fs[-1]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid + 0.5 * (worst - centroid)
            fc = self.obj(xc)
            if fc < min(fr, self.fs[-1]):
                self.simplex[-1], self.fs[-1] = xc, fc
            else:
                best = self.simplex[0]
                self.simplex[1:] = best + 0.5 * (self.simplex[1:] - best)
                self.fs[1:] = self.obj.batch(self.simplex[1:])
        return False


def _line_search(obj, z, f, g, d, max_halvings=30):
    """Armijo backtracking along the projected path clip(z + a d)."""
    a = 1.0
    for _ in range(max_halvings):
        zn = np.clip(z + a * d, 0.0, 1.0)
        step = zn - z
        if np.max(np.abs(step)) < 1e-14:
            return None
        fn = obj(zn)
        if fn <= f + 1e-4 * float(g @ step):
            return zn
        a *= 0.5
    return None


class _QuasiNewton(_Method):
    """Gradient method with an inverse-Hessian update (BFGS or DFP)."""

    def __init__(self, obj, rng, cfg):
        super().__init__(obj, rng, cfg)
        self.z = obj.best_z.copy()
        self.f, self.g = obj.value_and_grad(self.z)
        self.H = np.eye(self.n) * self._initial_scale()

    def _initial_scale(self):
        gnorm = np.linalg.norm(self.g)
        return 0.1 / gnorm if gnorm > 0 else 1.0

    def _update(self, s, y):  # pragma: no cover - interface
        raise NotImplementedError

    def direction(self):
        free = ~(((self.z <= 0.0) & (self.g > 0)) | ((self.z >= 1.0) & (self.g < 0)))
        d = np.zeros(self.n)
        Hf = self.H[np.ix_(free, free)]
        d[free] = -Hf @ self.g[free]
        return d

    def step(self):
        if np.linalg.norm(_projected_gradient(self.z, self.g)) < 1e-12:
            return True
        d = self.direction()
        if self.g @ d >= 0:
            self.H = np.eye(self.n) * self._initial_scale()
            d = self.direction()
        zn = _line_search(self.obj, self.z, self.f, self.g, d)
        if zn is None:
            return True
        fn, gn = self.obj.value_and_grad(zn)
        s, y = zn - self.z, gn - self.g
        if s @ y > 1e-16:
            self._update(s, y)
        self.z, self.f, self.g = zn, fn, gn
        return False


class BFGS(_QuasiNewton):
    name = "quasi_newton"

    def _update(self, s, y):
        rho = 1.0 / (y @ s)
        I = np.eye(self.n)
        self.H = (I - rho * np.outer(s, y)) @ self.H @ (I - rho * np.outer(y, s)) + rho * np.outer(s, s)


class DFP(_QuasiNewton):
    name = "dfp"

    def _update(self, s, y):
        Hy = self.H @ y
        self.H = self.H + np.outer(s, s) / (s @ y) - np.outer(Hy, Hy) / (y @ Hy)


def _box_qp(B, g, lo, hi):
    """min g.d + 0.5 d.B.d subject to lo <= d <= hi.

    With B = R^T R this is the bounded least-squares problem
    min |R d + R^-T g|^2, solved exactly by BVLS.
    """
    n = len(g)
    jitter = 0.0
    for _ in range(8):
        try:
            R = np.linalg.cholesky(B + jitter * np.eye(n)).T
            break
        except np.linalg.LinAlgError:
            jitter = max(1e-12, 10 * jitter) * max(1.0, float(np.max(np.abs(np.diag(B)))))
    else:
        R = np.eye(n)
    rhs = -np.linalg.solve(R.T, g)
    lo = np.minimum(lo, 0.0)
    hi = np.maximum(hi, 0.0)
    return lsq_linear(R, rhs, bounds=(lo, hi), method="bvls").x


class SQP(_Method):
    """Sequential quadratic programming on the box with a damped BFGS Hessian."""

    name = "sqp"

    def __init__(self, obj, rng, cfg):
        super().__init__(obj, rng, cfg)
        self.z = obj.best_z.copy()
        self.f, self.g = obj.value_and_grad(self.z)
        gnorm = np.linalg.norm(self.g)
        self.B = np.eye(self.n) * (10.0 * gnorm if gnorm > 0 else 1.0)

    def step(self):
        if np.linalg.norm(_projected_gradient(self.z, self.g)) < 1e-12:
            return True
        d = _box_qp(self.B, self.g, -self.z, 1.0 - self.z)
        if self.g @ d >= 0:
            return True
        zn = _line_search(self.obj, self.z, self.f, self.g, d)
        if zn is None:
            return True
        fn, gn = self.obj.value_and_grad(zn)
        s, y = zn - self.z, gn - self.g
        Bs = self.B @ s
        sBs = s @ Bs
        if sBs > 0:
            sy = s @ y
            theta = 1.0 if sy >= 0.2 * sBs else 0.8 * sBs / (sBs - sy)
            r = theta * y + (1 - theta) * Bs
            self.B = self.B - np.outer(Bs, Bs) / sBs + np.outer(r, r) / (s @ r)
        self.z, self.f, self.g = zn, fn, gn
        return False


METHODS = {cls.name: cls for cls in (DifferentialEvolution, BFGS, NelderMead, GeneticAlgorithm,
                                     DFP, SQP)}


def _relative_decrease(old, new):
    if not np.isfinite(old):
        return np.inf if np.isfinite(new) else 0.0
    if old == new:
        return 0.0
    return (old - new) / max(abs(old), 1e-300)


def hybrid_optimize(fun: Callable, x0, config: OptimizerConfig, grad: Optional[Callable] = None,
                    mask=None) -> OptimizeResult:
    """Minimize ``fun`` inside the box of ``config`` starting from ``x0``.

    ``grad``, when given, returns ``(f, df/dx)`` and is used by the gradient
    methods instead of finite differences. ``mask`` (True = free) freezes the
    other entries of ``x0``; ``fun``/``grad`` then act on the free subvector
    and the returned ``x`` holds the frozen values unchanged.
    """
    x0 = np.asarray(x0, dtype=float)
    mask = np.ones(len(x0), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != x0.shape:
        raise ConfigError("mask and x0 differ in length")
    if not mask.any():
        raise ConfigError("all parameters are masked")
    lower, upper = config.lower, config.upper
    if lower.shape == x0.shape and mask.sum() != len(x0):
        lower, upper = lower[mask], upper[mask]
    if lower.shape != (mask.sum(),):
        raise ConfigError("bounds do not match the number of free parameters")
    start = np.clip(x0[mask], lower, upper)

    obj = _Objective(fun, grad, lower, upper, config.max_evaluations, config.threads)
    rng = np.random.default_rng(config.seed)
    result = OptimizeResult(x=x0.copy(), fun=np.inf)
    z0 = (start - lower) / (upper - lower)
    f0 = obj(z0)
    if obj.best_z is None:
        obj.best_z = z0  # penalized start; population methods will look elsewhere
    trace = [obj.best_f]
    iteration = 0
    roster = list(config.roster)
    slot = 0
    pass_best = obj.best_f
    stop = ""
    log.debug("hybrid start: f0=%g", f0)
    while not stop:
        name = roster[slot % len(roster)]
        first = iteration
        history = [obj.best_f]
        try:
            method = METHODS[name](obj, rng, config)
            while True:
                done = method.step()
                iteration += 1
                trace.append(obj.best_f)
                history.append(obj.best_f)
                if config.target_cost is not None and obj.best_f <= config.target_cost:
                    stop = "target"
                    break
                if iteration >= config.max_iterations:
                    stop = "max_iterations"
                    break
                if done:
                    break
                if (len(history) > config.stall_window
                        and _relative_decrease(history[-1 - config.stall_window], history[-1])
                        < config.stall_tol):
                    break
        except _Budget:
            stop = "max_evaluations"
        result.switch_log.append({"algorithm": name, "first_iteration": first,
                                  "last_iteration": iteration - 1})
        if config.target_cost is not None and obj.best_f <= config.target_cost:
            stop = stop or "target"
        slot += 1
        if not stop and slot % len(roster) == 0:
            if _relative_decrease(pass_best, obj.best_f) < config.pass_tol:
                stop = "no_progress"
            pass_best = obj.best_f
    if not np.isfinite(obj.best_f):
        raise EstimationError(f"every evaluation failed ({obj.n_penalties} penalties); "
                              "check bounds and the a-priori parameters")
    x = x0.copy()
    x[mask] = obj.to_x(obj.best_z)
    result.x = x
    result.fun = obj.best_f
    result.trace = trace
    result.n_evaluations = obj.n_eval
    result.n_iterations = iteration
    result.n_penalties = obj.n_penalties
    result.stop_reason = stop
    return result
