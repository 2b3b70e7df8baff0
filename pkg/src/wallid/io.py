"""CSV and JSON readers/writers for the campaign file formats.

Boundary CSV:      time_hours,T_out_C,T_in_C
Observation CSV:   time_hours,sensor_1_C,...,sensor_M_C
Scan CSV:          t_ini_day,duration_day,psi,rank,failed
Sensitivity CSV:   time_hours,sensor_index,param_index,X_value

Floats are written with 17 significant digits so files round-trip exactly.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .exceptions import ConfigError

BOUNDARY_COLUMNS = ("time_hours", "T_out_C", "T_in_C")
SCAN_COLUMNS = ("t_ini_day", "duration_day", "psi", "rank", "failed")
SENSITIVITY_COLUMNS = ("time_hours", "sensor_index", "param_index", "X_value")


def _fmt(v) -> str:
    return repr(float(v))


def _read_table(path, expected_prefix=None):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: file not found")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if expected_prefix is not None and tuple(header[: len(expected_prefix)]) != tuple(expected_prefix):
        raise ConfigError(f"{path}: header {header} does not start with {list(expected_prefix)}")
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ConfigError(f"{path}: line {i} has {len(r)} columns, expected {len(header)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric value ({exc})") from None
    if data.size == 0:
        raise ConfigError(f"{path}: no data rows")
    if not np.all(np.isfinite(data)):
        raise ConfigError(f"{path}: contains NaN or inf; gap filling is not supported")
    return header, data


def _check_time(path, t):
    if len(t) < 2 or np.any(np.diff(t) <= 0):
        raise ConfigError(f"{path}: time_hours must be strictly increasing")


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def read_boundary_csv(path):
    """``(hours, T_out, T_in)`` from a boundary CSV."""
    _, data = _read_table(path, BOUNDARY_COLUMNS)
    if data.shape[1] != 3:
        raise ConfigError(f"{path}: expected columns {list(BOUNDARY_COLUMNS)}")
    _check_time(path, data[:, 0])
    return data[:, 0], data[:, 1], data[:, 2]


def write_boundary_csv(path, hours, T_out, T_in):
    rows = ([_fmt(a), _fmt(b), _fmt(c)] for a, b, c in zip(hours, T_out, T_in))
    return _write_rows(path, BOUNDARY_COLUMNS, rows)


def observation_columns(n_sensors: int) -> list:
    return ["time_hours"] + [f"sensor_{i + 1}_C" for i in range(n_sensors)]


def read_observation_csv(path):
    """``(hours, T)`` with ``T`` of shape (n_times, n_sensors)."""
    header, data = _read_table(path, ("time_hours",))
    if header != observation_columns(len(header) - 1) or len(header) < 2:
        raise ConfigError(f"{path}: expected columns time_hours,sensor_1_C,...,sensor_M_C")
    _check_time(path, data[:, 0])
    return data[:, 0], data[:, 1:]


def write_observation_csv(path, hours, T):
    T = np.asarray(T, dtype=float)
    if T.ndim == 1:
        T = T[:, None]
    rows = ([_fmt(h)] + [_fmt(v) for v in row] for h, row in zip(hours, T))
    return _write_rows(path, observation_columns(T.shape[1]), rows)


def write_scan_csv(path, scan):
    """One row per window of a ScanResult (or a dict of them)."""
    scans = scan.values() if isinstance(scan, dict) else [scan]
    rows = []
    for s in scans:
        for w in s.windows:
            rows.append([_fmt(w.plan.t_ini), _fmt(w.plan.duration), _fmt(w.psi), str(w.rank),
                         str(int(w.failed))])
    return _write_rows(path, SCAN_COLUMNS, rows)


def read_scan_csv(path) -> np.ndarray:
    _, data = _read_table(path, SCAN_COLUMNS)
    return data


def write_sensitivity_csv(path, hours, traces, param_indices):
    """Long format; ``traces`` has shape (n_times, n_sensors, n_params)."""
    traces = np.asarray(traces, dtype=float)
    rows = []
    for t, h in enumerate(hours):
        for i in range(traces.shape[1]):
            for p, m in enumerate(param_indices):
                rows.append([_fmt(h), str(i + 1), str(int(m)), _fmt(traces[t, i, p])])
    return _write_rows(path, SENSITIVITY_COLUMNS, rows)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (Path, os.PathLike)):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        # NaN is kept as the non-standard token so failed windows stay visible
        json.dump(payload, fh, indent=2, sort_keys=False, default=_json_default)
        fh.write("\n")
    return path


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: file not found")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
