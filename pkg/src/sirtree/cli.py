"""``sirtree`` command-line interface.

Exit codes: 0 success, 1 invariant failure or invalid run, 2 config error,
3 numerical abort.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import List, Optional

import numpy as np

from . import __version__
from . import io as sio
from .checks import exit_status, run_checks
from .config import RunConfig, load_config
from .dynamics import cumulative_initial_state, integrate, sir_initial_state
from .exceptions import (ConfigError, InvalidRunError, NumericalAbort, ParameterError,
                         SirTreeError)
from .model import critical_lambda, derive
from .stationary import solve_stationary
from .wavespeed import analytic_speed, empirical_speed

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
COMMANDS = ("derive", "simulate", "stationary", "speed", "sweep", "check")


class Output:
    """Collects artifacts; writes them under ``--out`` or prints the main one."""

    def __init__(self, prefix: Optional[str]):
        self.prefix = prefix
        self.written: List[str] = []

    def emit(self, name: str, text: str, primary: bool = True):
        path = sio.output_path(self.prefix, name)
        if path is None:
            if primary:
                sys.stdout.write(text)
            return
        sio.write_text(path, text)
        self.written.append(path)

    def finish(self, command: str, cfg: RunConfig, extra=None):
        if self.prefix is None:
            return
        path = sio.output_path(self.prefix, "manifest.json")
        listed = self.written + [path]
        sio.write_text(path, sio.json_text(
            sio.manifest(command, cfg.to_dict(), listed, __version__, extra)))
        self.written.append(path)


def _simulate(cfg: RunConfig):
    p, grid = cfg.params(), cfg.grid()
    ic = cfg.initial(grid)
    if cfg.model == "sir":
        state = sir_initial_state(ic, grid, cfg.margin)
    else:
        state = cumulative_initial_state(ic, grid, cfg.margin)
    return integrate(state, p, cfg.t_end, dt=cfg.dt, snapshot_every=cfg.snapshot_every)


def _speed_row(cfg: RunConfig, empirical: bool) -> dict:
    p = cfg.params()
    res = analytic_speed(p)
    row = {"k": p.k, "lambda": p.lam, "c_analytic": None if res is None else res.c_star,
           "gamma_star": None if res is None else res.gamma_star,
           "c_empirical": None, "rsq": None, "flag": ""}
    if empirical:
        try:
            trace = empirical_speed(_simulate(cfg), cfg.theta, cfg.fit_fraction, cfg.margin)
            row.update(c_empirical=trace.fitted_speed, rsq=trace.fit_rsq, flag=trace.flag or "ok")
        except InvalidRunError as exc:
            row.update(flag="invalid", detail=str(exc))
    return row


def cmd_derive(cfg: RunConfig, args, out: Output) -> int:
    p = cfg.params()
    report = derive(p).to_dict()
    res = analytic_speed(p)
    report["c_star"] = None if res is None else res.c_star
    report["gamma_star"] = None if res is None else res.gamma_star
    if args.format == "json":
        out.emit("derive.json", sio.json_text(report))
    else:
        out.emit("derive.csv", sio.csv_text(("quantity", "value"), report.items()))
    out.finish("derive", cfg)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args, out: Output) -> int:
    traj = _simulate(cfg)
    if args.format == "json":
        body = {"kind": traj.kind, "times": traj.times, "sites": traj.grid.sites,
                "fields": traj.fields}
        out.emit("trajectory.json", sio.json_text(body))
    else:
        out.emit("trajectory.csv", sio.trajectory_csv(traj))
    summary = {}
    try:
        trace = empirical_speed(traj, cfg.theta, cfg.fit_fraction, cfg.margin)
        summary = {"c_empirical": trace.fitted_speed, "rsq": trace.fit_rsq,
                   "flag": trace.flag or "ok"}
    except SirTreeError as exc:
        summary = {"flag": "invalid", "detail": str(exc)}
    out.finish("simulate", cfg, {"front": summary})
    return EXIT_OK


def cmd_stationary(cfg: RunConfig, args, out: Output) -> int:
    p, grid = cfg.params(), cfg.grid()
    prof = solve_stationary(cfg.initial(grid), p, grid, tol=cfg.tol, start=cfg.start,
                            t_max=cfg.t_max, dt=cfg.dt, margin=cfg.margin)
    summary = {"tail": prof.tail.value, "tail_rate": prof.tail_rate,
               "residual": prof.residual, "converged_from": prof.converged_from.value,
               "march_time": prof.march_time, "gap": prof.gap,
               "at_threshold": prof.at_threshold}
    if args.format == "json":
        out.emit("stationary.json", sio.json_text(
            dict(summary, sites=grid.sites, cumI_inf=prof.values)))
    else:
        out.emit("stationary.csv", sio.stationary_csv(prof.values, grid.sites, p))
    out.finish("stationary", cfg, {"stationary": summary})
    return EXIT_OK


def cmd_speed(cfg: RunConfig, args, out: Output) -> int:
    row = _speed_row(cfg, empirical=True)
    if args.format == "json":
        out.emit("speed.json", sio.json_text(row))
    else:
        out.emit("speed.csv", sio.sweep_csv([row]))
    out.finish("speed", cfg)
    return EXIT_FAIL if row["flag"] == "invalid" else EXIT_OK


def sweep_points(cfg: RunConfig):
    """``(k, lambda)`` pairs of the sweep in output order."""
    points = []
    for k in cfg.sweep_k:
        lc = critical_lambda(replace(cfg, k=k).params())
        hi = cfg.sweep_lambda_max
        if hi is None:
            hi = lc if lc is not None else 100.0
        if hi <= cfg.sweep_lambda_min:
            raise ConfigError(f"empty lambda range for k={k}: "
                              f"[{cfg.sweep_lambda_min:g}, {hi:g}]")
        if cfg.sweep_spacing == "log":
            lams = np.geomspace(cfg.sweep_lambda_min, hi, cfg.sweep_count)
        else:
            lams = np.linspace(cfg.sweep_lambda_min, hi, cfg.sweep_count)
        lams = [float(x) for x in lams]
        if cfg.sweep_include_critical and lc is not None and lc not in lams:
            lams = sorted(lams + [lc])
        points += [(k, lam) for lam in lams]
    return points


def _sweep_task(job):
    cfg, empirical = job
    return _speed_row(cfg, empirical)


def cmd_sweep(cfg: RunConfig, args, out: Output) -> int:
    jobs = [(replace(cfg, k=k, lam=lam), cfg.sweep_empirical) for k, lam in sweep_points(cfg)]
    workers = max(1, args.workers)
    if workers > 1 and cfg.sweep_empirical:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_task, jobs))  # map keeps submission order
    else:
        rows = [_sweep_task(job) for job in jobs]
    if args.format == "json":
        out.emit("sweep.json", sio.json_text(rows))
    else:
        out.emit("sweep.csv", sio.sweep_csv(rows))
    out.finish("sweep", cfg, {"points": len(rows)})
    return EXIT_FAIL if any(r["flag"] == "invalid" for r in rows) else EXIT_OK


def cmd_check(cfg: RunConfig, args, out: Output) -> int:
    results = run_checks(cfg)
    status = exit_status(results)
    rows = [r.to_dict() for r in results]
    if args.format == "json":
        out.emit("check.json", sio.json_text({"exit_status": status, "checks": rows}))
    else:
        cols = ("name", "status", "value", "tolerance", "detail")
        out.emit("check.csv", sio.csv_text(cols, ([r[c] for c in cols] for r in rows)))
    out.finish("check", cfg, {"exit_status": status})
    return status


HANDLERS = {"derive": cmd_derive, "simulate": cmd_simulate, "stationary": cmd_stationary,
            "speed": cmd_speed, "sweep": cmd_sweep, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        dest="overrides", help="override a config key (repeatable)")
    common.add_argument("--out", metavar="PREFIX",
                        help="write artifacts to PREFIX_<name> (or into PREFIX/ if a directory)")
    common.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    parser = argparse.ArgumentParser(
        prog="sirtree", description="SIR spreading on the integer lattice and homogeneous trees")
    parser.add_argument("--version", action="version", version=f"sirtree {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "derive": "closed-form thresholds, equilibria and the analytic speed",
        "simulate": "integrate the SIR or cumulative system and write snapshots",
        "stationary": "march to the stationary cumulative profile",
        "speed": "analytic and empirical spreading speed",
        "sweep": "analytic (and optionally empirical) speed over a lambda grid",
        "check": "run the invariant suite",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = "json" if args.command in ("derive", "check") else "csv"
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers < 1:
        print("config error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    out = Output(args.out)
    try:
        return HANDLERS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SirTreeError as exc:
        print(f"invalid run: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
