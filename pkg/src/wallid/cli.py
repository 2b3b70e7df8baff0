"""Command-line front end.

    wallid [--config C] [--seed S] [--threads N] [--out DIR] <command> [options]

Commands: simulate, synth, oed-scan, sensitivity, estimate, validate.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 estimation failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import CampaignConfig, load_config
from .exceptions import ConfigError, EstimationError, NumericalError, WallIDError
from .io import (read_json, write_boundary_csv, write_json, write_observation_csv, write_scan_csv,
                 write_sensitivity_csv)
from .pipeline import Campaign
from .twin import generate_twin
from .wall_model import KINDS

log = logging.getLogger("wallid")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _kinds(text: str) -> list:
    kinds = [k.strip() for k in text.split(",") if k.strip()]
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown parameterization(s) {bad}; choose from {KINDS}")
    return kinds


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _global_flags(parser: argparse.ArgumentParser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="YAML campaign file")
    parser.add_argument("--seed", type=_seed, default=default, help="random seed (overrides config)")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="worker threads for window scans and population evaluations")
    parser.add_argument("--out", default=argparse.SUPPRESS if suppress else "out",
                        help="output directory (default: ./out)")
    parser.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wallid", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        # global flags are accepted after the command too
        _global_flags(p, suppress=True)
        return p

    p = add("simulate", "forward simulation, sensor traces in degC")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--params", type=_floats, help="dimensionless parameters (default: a-priori)")
    p.add_argument("--start-day", type=float)
    p.add_argument("--end-day", type=float)

    p = add("synth", "generate a synthetic twin (boundary, observations, truth)")
    p.add_argument("--truth-kind", choices=KINDS)
    p.add_argument("--truth-params", type=_floats)
    p.add_argument("--days", type=int)
    p.add_argument("--noise", type=float, help="observation noise sigma in degC")

    p = add("oed-scan", "D-optimal window scan")
    p.add_argument("--durations", type=_floats, help="window lengths in days, e.g. 1,3,7")
    p.add_argument("--kinds", type=_kinds, help="parameterizations, comma separated")
    p.add_argument("--sliding", action="store_true", help="daily sliding windows")

    p = add("sensitivity", "sensitivity traces at the sensors")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--start-day", type=float)
    p.add_argument("--duration-day", type=float)

    p = add("estimate", "estimate the conductivity parameters over one window")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--t-ini-day", type=float, help="window start (default: scan argmax)")
    p.add_argument("--duration-day", type=float)

    p = add("validate", "full-span residuals at the estimated parameters")
    p.add_argument("--report", help="estimation JSON (default: <out>/estimate_<kind>.json)")
    p.add_argument("--kind", choices=KINDS)
    return parser


def _setup_logging(verbosity: int):
    level = logging.WARNING - 10 * min(verbosity, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _meta(args, cfg: CampaignConfig, **extra) -> dict:
    out = {"command": args.command, "seed": cfg.seed, "config": cfg.as_dict()}
    out.update(extra)
    return out


# commands ---------------------------------------------------------------

def cmd_simulate(args, cfg: CampaignConfig, out: Path) -> int:
    camp = Campaign.from_config(cfg)
    kind = args.kind or cfg.simulate.kind
    params = args.params if args.params is not None else cfg.simulate.params
    start = args.start_day if args.start_day is not None else cfg.simulate.start_day
    end = args.end_day if args.end_day is not None else cfg.simulate.end_day
    hours, T, runtime = camp.simulate(kind, params, start, end)
    write_observation_csv(out / "traces.csv", hours, T)
    model = camp.model(kind, params)
    write_json(out / "simulate.json", _meta(args, cfg, kind=kind, params=list(model.params),
                                            runtime_s=runtime, n_steps=int(round(
                                                camp.tstar(hours[-1] - hours[0]) / cfg.grid.dt_star)),
                                            scales=camp.scales.as_dict()))
    print(f"simulate: {len(hours)} records, {runtime:.3f} s -> {out / 'traces.csv'}")
    return 0


def cmd_synth(args, cfg: CampaignConfig, out: Path) -> int:
    spec = cfg.twin
    if args.truth_kind:
        spec.truth_kind = args.truth_kind
        spec.truth_params = None
    if args.truth_params is not None:
        spec.truth_params = tuple(args.truth_params)
    if args.days is not None:
        spec.days = args.days
    if args.noise is not None:
        if args.noise < 0:
            raise ConfigError("--noise must be >= 0")
        spec.obs_noise = args.noise
    spec.seed = cfg.seed
    tic = time.perf_counter()
    twin = generate_twin(spec, cfg.wall, cfg.sensors, cfg.grid.dx_star, cfg.grid.dt_star, cfg.scales.t_ref)
    write_boundary_csv(out / "boundary.csv", twin.hours, twin.T_out, twin.T_in)
    write_observation_csv(out / "observations.csv", twin.hours, twin.obs)
    write_observation_csv(out / "observations_clean.csv", twin.hours, twin.obs_clean)
    truth = twin.truth_dict()
    truth["seed"] = cfg.seed
    write_json(out / "truth.json", truth)
    print(f"synth: {spec.days} days, truth {twin.truth.kind} {np.round(twin.truth.params, 4).tolist()}, "
          f"{time.perf_counter() - tic:.2f} s -> {out}")
    return 0


def _scan_summary(scans: dict) -> dict:
    summary = {}
    for kind, by_duration in scans.items():
        rows = {}
        for d, s in by_duration.items():
            entry = {"n_windows": len(s.windows), "n_failed": len(s.failed),
                     "failed_t_ini_day": [w.plan.t_ini for w in s.failed],
                     "degenerate": s.degenerate}
            if s.valid:
                entry.update({"argmax_t_ini_day": s.argmax.plan.t_ini, "max_psi": s.max_psi,
                              "argmin_t_ini_day": s.argmin.plan.t_ini, "min_psi": s.argmin.psi,
                              "correlation_at_argmax": s.argmax.fisher.correlation()
                              if s.argmax.fisher is not None else None})
            rows[f"{d:g}"] = entry
        summary[kind] = rows
    return summary


def cmd_oed_scan(args, cfg: CampaignConfig, out: Path) -> int:
    camp = Campaign.from_config(cfg)
    kinds = args.kinds or cfg.oed.kinds
    durations = args.durations or cfg.oed.durations
    if args.sliding:
        cfg.oed.sliding = True
    tic = time.perf_counter()
    scans = camp.scan(kinds, durations, args.threads)
    for kind, by_duration in scans.items():
        write_scan_csv(out / f"scan_{kind}.csv", by_duration)
    summary = _scan_summary(scans)
    write_json(out / "scan_summary.json", _meta(args, cfg, runtime_s=time.perf_counter() - tic,
                                                scans=summary))
    for kind, rows in summary.items():
        for d, e in rows.items():
            if "max_psi" in e:
                print(f"{kind:10s} {d:>4s} d  argmax day {e['argmax_t_ini_day']:6g}  "
                      f"max psi {e['max_psi']:.4e}  argmin day {e['argmin_t_ini_day']:6g}")
            else:
                print(f"{kind:10s} {d:>4s} d  all windows failed")
    return 0


def cmd_sensitivity(args, cfg: CampaignConfig, out: Path) -> int:
    camp = Campaign.from_config(cfg)
    kind = args.kind or cfg.estimation.kind
    start = args.start_day if args.start_day is not None else cfg.estimation.t_ini_day
    duration = args.duration_day if args.duration_day is not None else cfg.estimation.duration_day
    hours, traces, idx = camp.sensitivities(kind, start, duration)
    write_sensitivity_csv(out / f"sensitivity_{kind}.csv", hours, traces, idx)
    names = camp.apriori(kind).param_names
    write_json(out / f"sensitivity_{kind}.json", _meta(
        args, cfg, kind=kind, param_index=idx, param_names=[names[i] for i in idx],
        mean_abs=np.mean(np.abs(traces), axis=0)))
    print(f"sensitivity: {kind}, {len(hours)} records x {traces.shape[1]} sensors x {len(idx)} params")
    return 0


def cmd_estimate(args, cfg: CampaignConfig, out: Path) -> int:
    camp = Campaign.from_config(cfg, require_observations=True)
    kind = args.kind or cfg.estimation.kind
    report = camp.estimate(kind, args.t_ini_day, args.duration_day, threads=args.threads)
    payload = report.as_dict(camp.scales)
    payload["config"] = cfg.as_dict()
    payload["scales"] = camp.scales.as_dict()
    write_json(out / f"estimate_{kind}.json", payload)
    print(f"estimate: {kind} P = {np.round(report.params, 5).tolist()}  J = {report.J:.5g}  "
          f"({report.n_iterations} iterations, {report.stop_reason}, {report.runtime_s:.1f} s)")
    return 0


def cmd_validate(args, cfg: CampaignConfig, out: Path) -> int:
    camp = Campaign.from_config(cfg, require_observations=True)
    kind = args.kind or cfg.estimation.kind
    path = Path(args.report) if args.report else out / f"estimate_{kind}.json"
    report = read_json(path)
    try:
        kind = report["kind"]
        params = report["P_est"]
    except KeyError as exc:
        raise ConfigError(f"{path}: missing key {exc.args[0]}") from None
    result = camp.validate(kind, params)
    tail = result.pop("tail")
    write_observation_csv(out / f"validate_{kind}_tail_simulated.csv", tail["hours"], tail["simulated_C"])
    write_observation_csv(out / f"validate_{kind}_tail_observed.csv", tail["hours"], tail["observed_C"])
    write_json(out / f"validate_{kind}.json", _meta(args, cfg, report=str(path), **result))
    flag = "PASS" if result["passed"] else "FAIL"
    print(f"validate: {kind} mean |eps| {np.round(result['mean_abs_residual_C'], 3).tolist()} C vs "
          f"sigma {np.round(result['sigma_C'], 3).tolist()} C -> {flag}")
    return 0


COMMANDS = {"simulate": cmd_simulate, "synth": cmd_synth, "oed-scan": cmd_oed_scan,
            "sensitivity": cmd_sensitivity, "estimate": cmd_estimate, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg, out)
    except EstimationError as exc:
        log.error("estimation failed: %s", exc)
        return exc.exit_code
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return exc.exit_code
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return exc.exit_code
    except WallIDError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return ConfigError.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
