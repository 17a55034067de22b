"""Command-line entry point.

Exit codes: 0 ok, 1 config or usage error, 2 stationary solver failure,
3 dynamics abort, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as dg
from . import dynamics as dy
from .io import (ConfigError, build_settings, load_config, parse_grids, write_json,
                 write_profile_csv, write_snapshot_csv, write_timeseries_csv)
from .model import ParameterError, validate_params
from .stationary import StationarySolveError, fixed_point_solve, shoot, stability_min_eigen

EXIT_OK, EXIT_CONFIG, EXIT_STATIONARY, EXIT_ABORT, EXIT_VERIFY = 0, 1, 2, 3, 4


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def _settings(args):
    if not args.config:
        raise ConfigError("--config is required")
    raw = load_config(args.config)
    settings = build_settings(raw, base_dir=Path(args.config).parent)
    report = validate_params(settings.params)
    if not report.ok:
        raise ParameterError(report)
    return settings


def cmd_stationary(args) -> int:
    s = _settings(args)
    solver = shoot if s.stationary_method == "shoot" else fixed_point_solve
    try:
        prof = solver(s.params, s.stationary_N, s.stationary_tol)
        lam = stability_min_eigen(prof)
    except StationarySolveError as exc:
        print(f"stationary solver failed: {exc}", file=sys.stderr)
        return EXIT_STATIONARY
    out = Path(args.out or "profile.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_profile_csv(out, prof, lam)
    _say(args, f"sigma={prof.sigma!r} l_inf={prof.l_inf!r} residual={prof.residual:.3e} "
               f"lambda_min={lam:.6g}")
    _say(args, f"wrote {out}")
    return EXIT_OK


def _write_run(out: Path, traj, partial=False):
    paths = []
    index = out / "snapshots.csv"
    with index.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t", "file"])
        for k, state in enumerate(traj.states):
            name = f"snapshot_{k:05d}.csv"
            write_snapshot_csv(out / name, state)
            paths.append(name)
            w.writerow([k, repr(float(state.t)), name])
    paths.append(index.name)
    if traj.records:
        write_timeseries_csv(out / "timeseries.csv", traj.records)
        paths.append("timeseries.csv")
        t = np.array([r.t for r in traj.records])
        E = np.array([r.E for r in traj.records])
        if t.size and t[-1] > 0:
            try:
                fit = dg.decay_rate_fit(t, E, (0.5 * t[-1], t[-1])).as_dict()
            except ValueError as exc:
                fit = {"error": str(exc)}
            write_json(out / "decay_fit.json", fit)
            paths.append("decay_fit.json")
    return paths


def cmd_simulate(args) -> int:
    s = _settings(args)
    out = Path(args.out or "run")
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    manifest = {"version": __version__, "config": s.resolved, "status": "ok"}
    code = EXIT_OK
    try:
        traj = dy.simulate(s.sim)
    except dy.SimulationAbort as exc:
        traj = exc.trajectory
        manifest["status"] = f"aborted({exc.reason})"
        manifest["abort_time"] = exc.t
        manifest["abort_rho_min"] = exc.rho_min
        manifest["abort_rho_max"] = exc.rho_max
        print(f"simulation aborted: {exc}", file=sys.stderr)
        code = EXIT_ABORT
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    artifacts = _write_run(out, traj) if traj is not None else []
    manifest["steps"] = traj.steps if traj is not None else 0
    manifest["artifacts"] = artifacts
    manifest["wall_clock_s"] = time.perf_counter() - start
    write_json(out / "manifest.json", manifest)
    _say(args, f"{manifest['status']}: {len(artifacts)} files in {out}")
    return code


def cmd_verify(args) -> int:
    from .verify import format_table, run_checks

    s = _settings(args)
    seed = args.seed if args.seed is not None else s.seed
    try:
        results = run_checks(s, seed=seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_convergence(args) -> int:
    s = _settings(args)
    grids = parse_grids(args.grids) if args.grids else s.grids
    if len(grids) < 3:
        print("convergence needs at least three grids (e.g. --grids 100,200,400)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = dg.convergence_study(s.sim, grids)
    except dy.SimulationAbort as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out or "convergence.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["field", "N", "N_ref", "error", "order", "pairwise_order"])
        for name, n1, n2, e, order, pair, exact in res.table():
            marks = ["exact" if exact else ("" if o is None else repr(o)) for o in (order, pair)]
            w.writerow([name, n1, n2, repr(e), *marks])
    for name, n1, n2, e, order, pair, exact in res.table():
        marks = ["exact" if exact else ("-" if o is None else f"{o:.3f}") for o in (order, pair)]
        _say(args, f"{name:<4} {n1:>6} vs {n2:<6} error={e:.3e} order={marks[0]} "
                   f"pairwise={marks[1]}")
    return EXIT_OK


COMMANDS = {"stationary": cmd_stationary, "simulate": cmd_simulate,
            "verify": cmd_verify, "convergence": cmd_convergence}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sphereflow",
                                 description="Free-boundary viscous gas ball: solver and checks.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--grids")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
