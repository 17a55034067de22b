"""Flat ``key = value`` configuration files and CSV emission."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .dynamics import InitialData, SimConfig
from .model import ForcingSpec, ModelParams

__all__ = ["ConfigError", "RunSettings", "parse_config", "load_config", "build_settings",
           "write_profile_csv", "write_snapshot_csv", "write_timeseries_csv", "write_json"]


class ConfigError(ValueError):
    """Unreadable or inconsistent configuration."""


PARAM_KEYS = {f.name: f.type for f in fields(ModelParams)}
FORCING_KEYS = {"pressure_kind": str, "pressure_amp": float, "pressure_rate": float,
                "force_kind": str, "force_amp": float, "force_rate": float, "force_shape": str}
SIM_KEYS = {"N": int, "t_end": float, "dt_safety": float, "snapshot_every": float,
            "max_steps": int}
INIT_KEYS = {"amp": float, "mode": int, "rho0": float, "file": str}
STATIONARY_KEYS = {"N": int, "tol": float, "method": str}
VERIFY_KEYS = {"checks": str, "N": int, "t_end": float, "refine": int}
OTHER_KEYS = {"seed": int, "initial_data": str, "grids": str}


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Values stay strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _convert(key, value, kind):
    try:
        if kind is int or kind == "int":
            f = float(value)
            if not f.is_integer():
                raise ValueError
            return int(f)
        if kind is float or kind == "float":
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot convert {value!r}") from exc


@dataclass(frozen=True)
class RunSettings:
    params: ModelParams
    forcing: ForcingSpec
    sim: SimConfig | None
    stationary_N: int = 2000
    stationary_tol: float = 1e-10
    stationary_method: str = "shoot"
    seed: int = 0
    grids: tuple = ()
    verify_checks: tuple = ()
    verify_tol: dict = field(default_factory=dict)
    verify_N: int = 200
    verify_t_end: float = 2.0
    verify_refine: int = 1
    resolved: dict = field(default_factory=dict)


def build_settings(raw: dict, base_dir=None) -> RunSettings:
    """Turn parsed key/values into typed settings; unknown keys are errors."""
    pk, fk, sk, ik, stk, vk, vt, ok = {}, {}, {}, {}, {}, {}, {}, {}
    for key, value in raw.items():
        if key in PARAM_KEYS:
            pk[key] = _convert(key, value, PARAM_KEYS[key])
        elif key.startswith("forcing.") and key[8:] in FORCING_KEYS:
            fk[key[8:]] = _convert(key, value, FORCING_KEYS[key[8:]])
        elif key in SIM_KEYS:
            sk[key] = _convert(key, value, SIM_KEYS[key])
        elif key.startswith("init.") and key[5:] in INIT_KEYS:
            ik[key[5:]] = _convert(key, value, INIT_KEYS[key[5:]])
        elif key.startswith("stationary.") and key[11:] in STATIONARY_KEYS:
            stk[key[11:]] = _convert(key, value, STATIONARY_KEYS[key[11:]])
        elif key.startswith("verify.tol."):
            vt[key[11:]] = _convert(key, value, float)
        elif key.startswith("verify.") and key[7:] in VERIFY_KEYS:
            vk[key[7:]] = _convert(key, value, VERIFY_KEYS[key[7:]])
        elif key in OTHER_KEYS:
            ok[key] = _convert(key, value, OTHER_KEYS[key])
        else:
            raise ConfigError(f"unknown key {key!r}")
    try:
        params = ModelParams(**pk)
        forcing = ForcingSpec(**fk)
        if "file" in ik and base_dir is not None and not Path(ik["file"]).is_absolute():
            ik["file"] = str(Path(base_dir) / ik["file"])
        init = InitialData(kind=ok.get("initial_data", "perturbed_stationary"), **ik)
        sim = SimConfig(params=params, forcing=forcing, initial_data=init, **sk)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    grids = ()
    if "grids" in ok:
        grids = parse_grids(ok["grids"])
    checks = tuple(c.strip() for c in vk.get("checks", "").split(",") if c.strip())
    method = stk.get("method", "shoot")
    if method not in ("shoot", "fixed_point"):
        raise ConfigError(f"stationary.method must be shoot or fixed_point, not {method!r}")
    resolved = {**params.as_dict(),
                **{f"forcing.{k}": getattr(forcing, k) for k in FORCING_KEYS},
                **{k: getattr(sim, k) for k in SIM_KEYS},
                "initial_data": init.kind,
                **{f"init.{k}": getattr(init, k) for k in INIT_KEYS},
                "stationary.N": stk.get("N", 2000), "stationary.tol": stk.get("tol", 1e-10),
                "stationary.method": method, "seed": ok.get("seed", 0)}
    return RunSettings(params, forcing, sim, stk.get("N", 2000), stk.get("tol", 1e-10), method,
                       ok.get("seed", 0), grids, checks, vt, vk.get("N", 200),
                       vk.get("t_end", 2.0), vk.get("refine", 1), resolved)


def parse_grids(text: str) -> tuple:
    try:
        return tuple(int(g) for g in str(text).split(",") if g.strip())
    except ValueError as exc:
        raise ConfigError(f"bad grid list {text!r}") from exc


def _fmt(v):
    return repr(float(v))


def write_profile_csv(path, profile, lambda_min=None):
    """Node table ``x,rho_inf,V_inf,r_inf`` followed by a ``# summary`` line."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "rho_inf", "V_inf", "r_inf"])
        for row in zip(profile.x, profile.rho, profile.V, profile.r):
            w.writerow([_fmt(v) for v in row])
        lam = "nan" if lambda_min is None else _fmt(lambda_min)
        fh.write(f"# summary sigma={_fmt(profile.sigma)} l_inf={_fmt(profile.l_inf)} "
                 f"residual={_fmt(profile.residual)} lambda_min={lam}\n")
    return path


def write_snapshot_csv(path, state):
    """Rows ``i,x,rho,u,r`` for ``i = 0..N+1``; ``rho`` is NaN on the outer node."""
    path = Path(path)
    N = state.N
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "x", "rho", "u", "r"])
        for i in range(N + 2):
            rho = state.rho[i] if i <= N else np.nan
            w.writerow([i, _fmt(min(i, N) * state.h), _fmt(rho), _fmt(state.u[i]), _fmt(state.r[i])])
    return path


def write_timeseries_csv(path, records):
    from .diagnostics import DiagnosticsRecord

    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DiagnosticsRecord.CSV_FIELDS)
        for rec in records:
            w.writerow([_fmt(v) for v in rec.as_row()])
    return path


def write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")
    return path
