"""Wall geometry, reference scaling and conductivity parameterizations.

Three spatial representations of the dimensionless conductivity k*(x*) are
supported, each exposing a flat parameter vector ``P``:

``piecewise``
    one constant per layer, ``P = (k*_1, ..., k*_N)``.
``linear``
    constant on every layer except one (the second layer by default), where
    ``k* = k*_20 + beta_21 * x*``. For a three-layer wall
    ``P = (k*_1, k*_20, beta_21, k*_3)``.
``quadratic``
    ``k* = k*_00 + beta_10 x* + beta_20 x*^2`` on the whole wall.

Layers own half-open intervals ``[x_{i-1}, x_i)``; the last layer is closed
on the right so the layers partition ``[0, 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .exceptions import ConfigError, DomainError, InvalidParameterError

PIECEWISE = "piecewise"
LINEAR = "linear"
QUADRATIC = "quadratic"
KINDS = (PIECEWISE, LINEAR, QUADRATIC)

# tolerance on the [0, 1] domain check, absorbs round-off of x / L
_X_TOL = 1e-12


@dataclass(frozen=True)
class Layer:
    thickness: float
    k: float
    c: float
    name: str = ""

    def __post_init__(self):
        for attr in ("thickness", "k", "c"):
            value = getattr(self, attr)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"layer {self.name or '?'}: {attr} must be > 0, got {value}")


@dataclass(frozen=True)
class WallSpec:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError("wall.layers: at least one layer is required")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def length(self) -> float:
        return float(sum(layer.thickness for layer in self.layers))

    @property
    def interfaces(self) -> np.ndarray:
        """Cumulative right-hand interface positions in metres; the last equals L."""
        return np.cumsum([layer.thickness for layer in self.layers])


@dataclass(frozen=True)
class SensorArray:
    positions: tuple[float, ...]
    sigma_T: float = 0.5
    delta_interior: float = 0.01
    delta_boundary: float = 0.015

    def __post_init__(self):
        pos = tuple(float(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if not pos:
            raise ConfigError("sensors.positions: at least one sensor is required")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ConfigError("sensors.positions must be strictly increasing")
        for attr in ("sigma_T", "delta_interior", "delta_boundary"):
            if not getattr(self, attr) > 0:
                raise ConfigError(f"sensors.{attr} must be > 0")

    @property
    def n_sensors(self) -> int:
        return len(self.positions)

    def check_inside(self, length: float):
        for i, p in enumerate(self.positions):
            if p < 0 or p > length * (1 + _X_TOL):
                raise DomainError(f"sensors.positions[{i}] = {p} m lies outside [0, {length}] m")

    def deltas(self, length: float) -> np.ndarray:
        """Placement uncertainty per sensor: boundary value on x in {0, L}."""
        pos = np.asarray(self.positions)
        on_boundary = np.isclose(pos, 0.0) | np.isclose(pos, length)
        return np.where(on_boundary, self.delta_boundary, self.delta_interior)


@dataclass(frozen=True)
class ReferenceScales:
    L_ref: float
    T_ref: float
    dT_ref: float
    t_ref: float
    k_ref: float
    c_ref: float

    def __post_init__(self):
        for attr in ("L_ref", "dT_ref", "t_ref", "k_ref", "c_ref"):
            value = getattr(self, attr)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"scales.{attr} must be > 0, got {value}")
        if not np.isfinite(self.T_ref):
            raise ConfigError("scales.T_ref must be finite")

    @property
    def fourier(self) -> float:
        return self.t_ref * self.k_ref / (self.L_ref**2 * self.c_ref)

    @classmethod
    def default(cls, wall: WallSpec, temperatures=None, t_ref: float = 3600.0) -> "ReferenceScales":
        """Defaults: L_ref = L, k_ref = k_1, c_ref = c_1, T_ref/dT_ref from data range."""
        if temperatures is None:
            T_ref, dT_ref = 0.0, 1.0
        else:
            temps = np.asarray(temperatures, dtype=float)
            T_ref = float(np.min(temps))
            dT_ref = float(np.max(temps) - T_ref)
            if dT_ref <= 0:
                dT_ref = 1.0
        first = wall.layers[0]
        return cls(L_ref=wall.length, T_ref=T_ref, dT_ref=dT_ref, t_ref=t_ref,
                   k_ref=first.k, c_ref=first.c)

    # conversions -------------------------------------------------------
    def u_from_celsius(self, T):
        return (np.asarray(T, dtype=float) - self.T_ref) / self.dT_ref

    def celsius_from_u(self, u):
        return np.asarray(u, dtype=float) * self.dT_ref + self.T_ref

    def tstar_from_hours(self, hours):
        return np.asarray(hours, dtype=float) * 3600.0 / self.t_ref

    def hours_from_tstar(self, tstar):
        return np.asarray(tstar, dtype=float) * self.t_ref / 3600.0

    def as_dict(self) -> dict:
        return {"L_ref": self.L_ref, "T_ref": self.T_ref, "dT_ref": self.dT_ref,
                "t_ref": self.t_ref, "k_ref": self.k_ref, "c_ref": self.c_ref,
                "fourier": self.fourier}


def _layer_index(interfaces: np.ndarray, x) -> np.ndarray:
    # points within round-off of an interface belong to the layer on its right
    idx = np.searchsorted(interfaces, np.asarray(x) + 1e-12, side="right")
    return np.minimum(idx, len(interfaces) - 1)


def _check_domain(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < -_X_TOL) or np.any(x > 1 + _X_TOL):
        raise DomainError(f"x* must lie in [0, 1], got range [{x.min()}, {x.max()}]")
    return np.clip(x, 0.0, 1.0)


@dataclass(frozen=True)
class ConductivityModel:
    """Dimensionless conductivity k*(x*) with parameter vector ``params``.

    ``interfaces`` are the dimensionless right-hand layer boundaries (last
    entry 1). ``linear_layer`` selects the layer carrying the linear profile
    for the ``linear`` kind.
    """

    kind: str
    params: tuple[float, ...]
    interfaces: tuple[float, ...]
    linear_layer: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown parameterization {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "interfaces", tuple(float(x) for x in self.interfaces))
        n = len(self.interfaces)
        expected = {PIECEWISE: n, LINEAR: n + 1, QUADRATIC: 3}[self.kind]
        if len(self.params) != expected:
            raise ConfigError(f"{self.kind} model on a {n}-layer wall needs {expected} parameters, "
                              f"got {len(self.params)}")
        if self.kind == LINEAR and not 0 <= self.linear_layer < n:
            raise ConfigError(f"linear_layer {self.linear_layer} out of range for {n} layers")

    @property
    def n_params(self) -> int:
        return len(self.params)

    @property
    def param_names(self) -> list[str]:
        n = len(self.interfaces)
        if self.kind == PIECEWISE:
            return [f"k{i + 1}" for i in range(n)]
        if self.kind == QUADRATIC:
            return ["k00", "beta10", "beta20"]
        j = self.linear_layer + 1
        names = [f"k{i + 1}" for i in range(self.linear_layer)]
        names += [f"k{j}0", f"beta{j}1"]
        names += [f"k{i + 1}" for i in range(self.linear_layer + 1, n)]
        return names

    def with_params(self, params) -> "ConductivityModel":
        return replace(self, params=tuple(np.asarray(params, dtype=float).ravel()))

    def layer_index(self, x) -> np.ndarray:
        return _layer_index(np.asarray(self.interfaces), _check_domain(x))

    def _raw(self, x: np.ndarray) -> np.ndarray:
        P = np.asarray(self.params)
        if self.kind == QUADRATIC:
            return P[0] + P[1] * x + P[2] * x * x
        layer = _layer_index(np.asarray(self.interfaces), x)
        if self.kind == PIECEWISE:
            return P[layer]
        # linear: layer values with two slots reserved for the sloped layer
        lin = self.linear_layer
        const = np.concatenate([P[:lin], [np.nan], P[lin + 2:]])
        out = const[layer]
        on_lin = layer == lin
        out[on_lin] = P[lin] + P[lin + 1] * x[on_lin]
        return out

    def evaluate(self, x, check: bool = True) -> np.ndarray:
        """k*(x*); raises InvalidParameterError if any value is non-positive."""
        x = _check_domain(x)
        scalar = x.ndim == 0
        k = self._raw(np.atleast_1d(x))
        if check and not np.all(k > 0):
            bad = np.atleast_1d(x)[~(k > 0)][0]
            raise InvalidParameterError(
                f"{self.kind} conductivity is non-positive (k*={k[~(k > 0)][0]:.4g}) at x*={bad:.4g}")
        return k[0] if scalar else k

    def dparam(self, index: int, x) -> np.ndarray:
        """Partial derivative dk*/dP_index at x*."""
        if not 0 <= index < self.n_params:
            raise IndexError(f"parameter index {index} out of range for {self.n_params} parameters")
        x = _check_domain(x)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if self.kind == QUADRATIC:
            out = x**index
        else:
            layer = _layer_index(np.asarray(self.interfaces), x)
            if self.kind == PIECEWISE:
                out = (layer == index).astype(float)
            else:
                lin = self.linear_layer
                if index < lin:
                    out = (layer == index).astype(float)
                elif index == lin:
                    out = (layer == lin).astype(float)
                elif index == lin + 1:
                    out = np.where(layer == lin, x, 0.0)
                else:
                    out = (layer == index - 1).astype(float)
        return out[0] if scalar else out

    def check_positive(self, n: int = 2001):
        """Raise if k* is non-positive anywhere on [0, 1]."""
        x = np.linspace(0.0, 1.0, n)
        extra = list(self.interfaces[:-1])
        if self.kind == QUADRATIC and self.params[2] != 0:
            vertex = -self.params[1] / (2 * self.params[2])
            if 0 <= vertex <= 1:
                extra.append(vertex)
        self.evaluate(np.concatenate([x, extra]))

    def as_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params),
                "param_names": self.param_names, "interfaces": list(self.interfaces)}


@dataclass(frozen=True)
class CapacityModel:
    """Piecewise-constant dimensionless volumetric heat capacity."""

    values: tuple[float, ...]
    interfaces: tuple[float, ...] = field(default=(1.0,))

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "interfaces", tuple(float(v) for v in self.interfaces))
        if len(self.values) != len(self.interfaces):
            raise ConfigError("capacity values and interfaces differ in length")
        if not all(v > 0 for v in self.values):
            raise ConfigError("capacity values must be > 0")

    def evaluate(self, x) -> np.ndarray:
        x = _check_domain(x)
        return np.asarray(self.values)[_layer_index(np.asarray(self.interfaces), x)]


def nondimensionalize(wall: WallSpec, scales: ReferenceScales):
    """Return the a-priori piecewise conductivity, the capacity model and x*_int."""
    interfaces = tuple(np.round(wall.interfaces / scales.L_ref, 12))
    if not np.isclose(interfaces[-1], 1.0):
        raise ConfigError(f"scales.L_ref = {scales.L_ref} must equal the wall length {wall.length}")
    interfaces = interfaces[:-1] + (1.0,)
    kmodel = ConductivityModel(PIECEWISE, [layer.k / scales.k_ref for layer in wall.layers], interfaces)
    cmodel = CapacityModel([layer.c / scales.c_ref for layer in wall.layers], interfaces)
    return kmodel, cmodel, np.asarray(interfaces)


def redimensionalize_conductivity(model: ConductivityModel, scales: ReferenceScales, x_m) -> np.ndarray:
    """Conductivity in W/(m K) at physical positions ``x_m``."""
    return model.evaluate(np.asarray(x_m, dtype=float) / scales.L_ref) * scales.k_ref


def apriori_model(kind: str, piecewise: ConductivityModel, linear_layer: int = 1,
                  params: Sequence[float] | None = None) -> ConductivityModel:
    """A-priori model of the requested kind derived from layer values.

    ``linear`` keeps the layer constants with zero slope; ``quadratic`` is the
    least-squares quadratic fit of the piecewise profile over [0, 1]. Explicit
    ``params`` override the derivation.
    """
    if piecewise.kind != PIECEWISE:
        raise ConfigError("apriori_model expects a piecewise source model")
    if params is not None:
        return ConductivityModel(kind, params, piecewise.interfaces, linear_layer)
    P = list(piecewise.params)
    if kind == PIECEWISE:
        return piecewise
    if kind == LINEAR:
        if len(P) < 2:
            raise ConfigError("linear parameterization needs at least two layers")
        derived = P[:linear_layer] + [P[linear_layer], 0.0] + P[linear_layer + 1:]
        return ConductivityModel(LINEAR, derived, piecewise.interfaces, linear_layer)
    x = np.linspace(0.0, 1.0, 20001)
    coef = np.polynomial.polynomial.polyfit(x, piecewise.evaluate(x), 2)
    return ConductivityModel(QUADRATIC, coef, piecewise.interfaces)


def identifiable_mask(model: ConductivityModel, sensors_xstar: Sequence[float]) -> np.ndarray:
    """True for parameters that influence k* on a layer holding a sensor.

    Constants of sensor-free layers cannot be recovered from interior
    observations; they are frozen during estimation. The number of free
    parameters must not exceed the number of interior sensors.
    """
    xs = np.asarray(sensors_xstar, dtype=float)
    interior = xs[(xs > 0) & (xs < 1)]
    sensed = set(_layer_index(np.asarray(model.interfaces), interior).tolist())
    if model.kind == QUADRATIC:
        mask = np.ones(3, dtype=bool)
    elif model.kind == PIECEWISE:
        mask = np.array([i in sensed for i in range(model.n_params)])
    else:
        lin = model.linear_layer
        owners = list(range(lin)) + [lin, lin] + list(range(lin + 1, len(model.interfaces)))
        mask = np.array([o in sensed for o in owners])
    if mask.sum() > len(interior):
        raise ConfigError(f"{mask.sum()} free parameters but only {len(interior)} interior sensors")
    return mask


# functional aliases ------------------------------------------------------

def eval_conductivity(model: ConductivityModel, x_star):
    return model.evaluate(x_star)


def eval_dk_dparam(model: ConductivityModel, param_index: int, x_star):
    return model.dparam(param_index, x_star)
