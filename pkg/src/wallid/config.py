"""Campaign configuration loaded from YAML.

Every section is optional; missing keys take the case-study defaults (three
layer wall, three sensors). Unknown keys are rejected so that typos surface
as configuration errors naming the offending key. Relative data paths are
resolved against the directory holding the config file.

Example::

    wall:
      layers:
        - {thickness: 0.20, k: 1.75, c: 1.6e6, name: stone}
        - {thickness: 0.28, k: 2.30, c: 2.8e6, name: concrete}
        - {thickness: 0.02, k: 0.80, c: 2.2e6, name: plaster}
    sensors: {positions: [0.05, 0.23, 0.42], sigma_T: 0.5}
    data: {boundary: boundary.csv, observations: observations.csv}
    estimation: {kind: quadratic, duration_day: 3}
    seed: 0
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .exceptions import ConfigError
from .twin import SyntheticTwinSpec
from .wall_model import KINDS, Layer, SensorArray, WallSpec

DEFAULT_LAYERS = (
    {"thickness": 0.20, "k": 1.75, "c": 1.6e6, "name": "stone"},
    {"thickness": 0.28, "k": 2.30, "c": 2.8e6, "name": "concrete"},
    {"thickness": 0.02, "k": 0.80, "c": 2.2e6, "name": "plaster"},
)
DEFAULT_SENSORS = (0.05, 0.23, 0.42)


@dataclass
class GridSettings:
    dx_star: float = 0.01
    dt_star: float = 0.01
    blowup: float = 1e3


@dataclass
class ScaleSettings:
    t_ref: float = 3600.0
    T_ref: Optional[float] = None  # default: min of boundary data
    dT_ref: Optional[float] = None  # default: range of boundary data


@dataclass
class DataSettings:
    boundary: Optional[str] = None
    observations: Optional[str] = None


@dataclass
class OEDSettings:
    durations: list = field(default_factory=lambda: [1.0, 3.0, 7.0])
    kinds: list = field(default_factory=lambda: list(KINDS))
    spinup_hours: float = 12.0
    sliding: bool = False


@dataclass
class EstimationSettings:
    kind: str = "quadratic"
    t_ini_day: Optional[float] = None  # None: argmax of the scan
    duration_day: float = 3.0
    warmup_hours: float = 48.0
    apriori: Optional[list] = None
    lower: Optional[list] = None
    upper: Optional[list] = None
    linear_layer: int = 1


@dataclass
class OptimizerSettings:
    max_iterations: int = 500
    max_evaluations: int = 20000
    stall_tol: float = 1e-6
    stall_window: int = 10
    pass_tol: float = 1e-6
    de_population_factor: int = 10
    ga_population_factor: int = 20
    roster: Optional[list] = None
    target_cost: Optional[float] = None


@dataclass
class SimulateSettings:
    kind: str = "piecewise"
    params: Optional[list] = None
    start_day: Optional[float] = None
    end_day: Optional[float] = None


@dataclass
class CampaignConfig:
    wall: WallSpec
    sensors: SensorArray
    grid: GridSettings = field(default_factory=GridSettings)
    scales: ScaleSettings = field(default_factory=ScaleSettings)
    data: DataSettings = field(default_factory=DataSettings)
    oed: OEDSettings = field(default_factory=OEDSettings)
    estimation: EstimationSettings = field(default_factory=EstimationSettings)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)
    twin: SyntheticTwinSpec = field(default_factory=SyntheticTwinSpec)
    seed: int = 0
    source: Optional[str] = None

    def as_dict(self) -> dict:
        out = {
            "wall": {"layers": [asdict(layer) for layer in self.wall.layers]},
            "sensors": {"positions": list(self.sensors.positions), "sigma_T": self.sensors.sigma_T,
                        "delta_interior": self.sensors.delta_interior,
                        "delta_boundary": self.sensors.delta_boundary},
            "seed": self.seed,
            "source": self.source,
        }
        for name in ("grid", "scales", "data", "oed", "estimation", "optimizer", "simulate", "twin"):
            out[name] = asdict(getattr(self, name))
        return out


def _build(cls, raw, section: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{section}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _positive(section, obj, *names):
    for n in names:
        v = getattr(obj, n)
        if not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"{section}.{n}: must be a number > 0, got {v!r}")


def _wall(raw) -> WallSpec:
    raw = raw or {}
    if set(raw) - {"layers"}:
        raise ConfigError(f"wall: unknown key(s) {sorted(set(raw) - {'layers'})}")
    layers = raw.get("layers", DEFAULT_LAYERS)
    if not isinstance(layers, (list, tuple)) or not layers:
        raise ConfigError("wall.layers: expected a non-empty list")
    out = []
    for i, layer in enumerate(layers):
        if not isinstance(layer, dict):
            raise ConfigError(f"wall.layers[{i}]: expected a mapping")
        unknown = set(layer) - {"thickness", "k", "c", "name"}
        if unknown:
            raise ConfigError(f"wall.layers[{i}]: unknown key(s) {sorted(unknown)}")
        try:
            out.append(Layer(float(layer["thickness"]), float(layer["k"]), float(layer["c"]),
                             str(layer.get("name", f"layer{i + 1}"))))
        except KeyError as exc:
            raise ConfigError(f"wall.layers[{i}].{exc.args[0]}: missing") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"wall.layers[{i}]: {exc}") from None
    return WallSpec(tuple(out))


def _sensors(raw, wall: WallSpec) -> SensorArray:
    raw = dict(raw or {})
    allowed = {"positions", "sigma_T", "delta_interior", "delta_boundary"}
    if set(raw) - allowed:
        raise ConfigError(f"sensors: unknown key(s) {sorted(set(raw) - allowed)}")
    raw.setdefault("positions", list(DEFAULT_SENSORS))
    try:
        raw["positions"] = tuple(float(p) for p in raw["positions"])
        sensors = SensorArray(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sensors: {exc}") from None
    sensors.check_inside(wall.length)
    return sensors


def _resolve(base: Optional[Path], value, key: str) -> Optional[str]:
    if value is None:
        return None
    p = Path(value)
    if not p.is_absolute() and base is not None:
        p = base / p
    if not p.is_file():
        raise ConfigError(f"{key}: file not found: {p}")
    return str(p)


def build_config(raw: Optional[dict], base_dir: Optional[Path] = None,
                 source: Optional[str] = None) -> CampaignConfig:
    raw = dict(raw or {})
    top = {"wall", "sensors", "grid", "scales", "data", "oed", "estimation", "optimizer",
           "simulate", "twin", "seed"}
    unknown = set(raw) - top
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")
    wall = _wall(raw.get("wall"))
    sensors = _sensors(raw.get("sensors"), wall)
    grid = _build(GridSettings, raw.get("grid"), "grid")
    _positive("grid", grid, "dx_star", "dt_star", "blowup")
    n = 1.0 / grid.dx_star
    if abs(n - round(n)) > 1e-9:
        raise ConfigError("grid.dx_star: must divide 1 into a whole number of cells")
    scales = _build(ScaleSettings, raw.get("scales"), "scales")
    _positive("scales", scales, "t_ref")
    if scales.dT_ref is not None:
        _positive("scales", scales, "dT_ref")
    data = _build(DataSettings, raw.get("data"), "data")
    data.boundary = _resolve(base_dir, data.boundary, "data.boundary")
    data.observations = _resolve(base_dir, data.observations, "data.observations")
    oed = _build(OEDSettings, raw.get("oed"), "oed")
    if not oed.durations or any(not d > 0 for d in oed.durations):
        raise ConfigError("oed.durations: need one or more positive durations (days)")
    oed.durations = [float(d) for d in oed.durations]
    for k in oed.kinds:
        if k not in KINDS:
            raise ConfigError(f"oed.kinds: unknown parameterization {k!r}")
    est = _build(EstimationSettings, raw.get("estimation"), "estimation")
    if est.kind not in KINDS:
        raise ConfigError(f"estimation.kind: unknown parameterization {est.kind!r}")
    _positive("estimation", est, "duration_day")
    if est.warmup_hours < 0:
        raise ConfigError("estimation.warmup_hours: must be >= 0")
    if est.t_ini_day is not None and est.t_ini_day < 0:
        raise ConfigError("estimation.t_ini_day: must be >= 0")
    opt = _build(OptimizerSettings, raw.get("optimizer"), "optimizer")
    _positive("optimizer", opt, "max_iterations", "max_evaluations", "stall_window")
    sim = _build(SimulateSettings, raw.get("simulate"), "simulate")
    if sim.kind not in KINDS:
        raise ConfigError(f"simulate.kind: unknown parameterization {sim.kind!r}")
    twin_raw = dict(raw.get("twin") or {})
    if "seed" in twin_raw:
        raise ConfigError("twin.seed: the twin uses the top-level seed")
    if "truth_params" in twin_raw and twin_raw["truth_params"] is not None:
        twin_raw["truth_params"] = tuple(twin_raw["truth_params"])
    twin = _build(SyntheticTwinSpec, twin_raw, "twin")
    if twin.truth_kind not in KINDS:
        raise ConfigError(f"twin.truth_kind: unknown parameterization {twin.truth_kind!r}")
    if twin.obs_noise < 0 or twin.boundary_noise < 0:
        raise ConfigError("twin: noise levels must be >= 0")
    if twin.days < 1:
        raise ConfigError("twin.days: must be >= 1")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: must be a non-negative integer, got {seed!r}")
    return CampaignConfig(wall, sensors, grid, scales, data, oed, est, opt, sim, twin, seed,
                          source)


def load_config(path=None) -> CampaignConfig:
    """Read a YAML campaign file; ``None`` gives the built-in defaults."""
    if path is None:
        return build_config({})
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return build_config(raw, path.parent, str(path))


def check_data_span(cfg: CampaignConfig, hours) -> None:
    """Cross-field checks that need the boundary data."""
    span_days = (float(np.max(hours)) - float(np.min(hours))) / 24.0
    longest = max(cfg.oed.durations)
    if longest > span_days + 1e-9:
        raise ConfigError(f"oed.durations: {longest:g}-day window exceeds the {span_days:g}-day data span")
    est = cfg.estimation
    if est.t_ini_day is not None:
        first = float(np.min(hours)) / 24.0
        if est.t_ini_day < first - 1e-9 or est.t_ini_day + est.duration_day > first + span_days + 1e-9:
            raise ConfigError("estimation.t_ini_day/duration_day: window lies outside the data span")
