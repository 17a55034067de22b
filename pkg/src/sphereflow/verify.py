"""Configurable check table driven by the CLI ``verify`` subcommand."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics as dg
from . import dynamics as dy
from .model import ModelParams, ParameterError, discriminant, validate_params
from .stationary import StationarySolveError, shoot, verify_stationary_identity

__all__ = ["CheckResult", "CHECKS", "DEFAULT_TOL", "run_checks", "random_valid_params",
           "random_state", "format_table"]

CHECKS = ("stationary_identity", "dissipation_positivity", "volume_compatibility",
          "energy_balance", "v1_monotonicity", "decay_fit", "h_functional")

DEFAULT_TOL = {
    "stationary_identity": 1e-6,
    "dissipation_positivity": 0.0,
    "volume_compatibility": 1e-10,
    "energy_balance": 1e-2,
    "v1_monotonicity": 1e-8,
    "decay_fit": 0.95,
    "h_functional": 1.0,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # PASS, FAIL or SKIPPED
    value: float
    tol: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "FAIL"


def random_valid_params(rng: np.random.Generator) -> ModelParams:
    """Sample parameters accepted by ``validate_params``, including ``c2 < 0``."""
    while True:
        n = int(rng.integers(2, 4))
        c1 = float(rng.uniform(0.1, 2.0))
        c2 = float(c1 * rng.uniform(-0.6, 3.0))
        gamma = float(rng.uniform((2.0 * n - 2.0) / n + 0.05, 3.0))
        p = ModelParams(n=n, gamma=gamma, A=float(rng.uniform(0.5, 2.0)),
                        theta=float(rng.uniform(0.0, 2.0)), c1=c1, c2=c2,
                        G=float(rng.uniform(0.0, 1.0)), P_inf=float(rng.uniform(0.05, 1.0)),
                        M=float(rng.uniform(0.5, 2.0)))
        if validate_params(p).ok and discriminant(n, c1, c2) < 0:
            return p


def random_state(p: ModelParams, N: int, rng: np.random.Generator,
                 rho_amp: float = 0.3, u_amp: float = 1.0) -> dy.DiscreteState:
    """Smooth random perturbation of the rest state plus a random velocity field."""
    base = dy.discrete_equilibrium(p, N)
    xi = np.linspace(0.0, 1.0, N + 1)
    k = np.arange(1, 6)
    a = rng.uniform(-1, 1, k.size) / k
    b = rng.uniform(-1, 1, k.size) / k
    shape = np.cos(np.pi * np.outer(xi, k)) @ a
    shape /= max(1.0, np.max(np.abs(shape)))
    rho = base.rho * (1.0 + rho_amp * shape)
    u = u_amp * (np.sin(np.pi * np.outer(xi, k)) @ b) + 0.1 * u_amp * rng.standard_normal(N + 1)
    return dy.state_from_cells(p, rho, u)


def _tol(tols, name):
    return float(tols.get(name, DEFAULT_TOL[name]))


def run_checks(settings, checks=None, seed: int | None = None) -> list:
    """Evaluate the selected checks; returns one :class:`CheckResult` per check."""
    p = settings.params
    report = validate_params(p)
    if not report.ok:
        raise ParameterError(report)
    checks = tuple(checks or settings.verify_checks or CHECKS)
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks: {', '.join(unknown)}")
    tols = settings.verify_tol
    seed = settings.seed if seed is None else seed
    out = []

    if "stationary_identity" in checks:
        tol = _tol(tols, "stationary_identity")
        try:
            prof = shoot(p, settings.stationary_N, settings.stationary_tol)
            res = verify_stationary_identity(prof)
            out.append(CheckResult("stationary_identity", "PASS" if res <= tol else "FAIL", res, tol,
                                   f"N={settings.stationary_N}"))
        except StationarySolveError as exc:
            out.append(CheckResult("stationary_identity", "FAIL", math.nan, tol, str(exc)))

    if "dissipation_positivity" in checks:
        tol = _tol(tols, "dissipation_positivity")
        rng = np.random.default_rng(seed)
        worst = math.inf
        for _ in range(1000):
            s = random_state(p, 32, rng)
            worst = min(worst, dg.dissipation(s, p))
        out.append(CheckResult("dissipation_positivity", "PASS" if worst >= -tol else "FAIL",
                               worst, tol, "min D over 1000 random states"))

    dyn = [c for c in checks if c in CHECKS[2:]]
    if dyn:
        out.extend(_dynamic_checks(settings, dyn, tols))
    order = {name: k for k, name in enumerate(CHECKS)}
    return sorted(out, key=lambda r: order[r.name])


def _dynamic_checks(settings, names, tols):
    p = settings.params
    base = settings.sim
    T = settings.verify_t_end
    cfg = base.replace(N=settings.verify_N, t_end=T, snapshot_every=T / 100)
    results = []
    try:
        traj = dy.simulate(cfg)
    except dy.SimulationAbort as exc:
        return [CheckResult(name, "FAIL", math.nan, _tol(tols, name), str(exc)) for name in names]
    recs = traj.records
    forced = (settings.forcing.active_pressure_amp != 0 or settings.forcing.active_force_amp != 0)

    if "volume_compatibility" in names:
        tol = _tol(tols, "volume_compatibility")
        v = max(r.mass_vol_residual for r in recs)
        results.append(CheckResult("volume_compatibility", "PASS" if v <= tol else "FAIL", v, tol))
    if "energy_balance" in names:
        tol = _tol(tols, "energy_balance")
        v = dg.energy_balance_residual(recs)
        results.append(CheckResult("energy_balance", "PASS" if v <= tol else "FAIL", v, tol,
                                   "normalised by dissipated energy"))
    if "v1_monotonicity" in names:
        tol = _tol(tols, "v1_monotonicity")
        if forced:
            results.append(CheckResult("v1_monotonicity", "SKIPPED", math.nan, tol,
                                       "forcing active"))
        else:
            t = np.array([r.t for r in recs])
            V1 = np.array([r.V1 for r in recs])
            worst = float(np.max(np.diff(V1) / np.diff(t))) if t.size > 1 else 0.0
            results.append(CheckResult("v1_monotonicity", "PASS" if worst <= tol else "FAIL",
                                       worst, tol, "max dV1/dt between records"))
    if "decay_fit" in names:
        tol = _tol(tols, "decay_fit")
        t = np.array([r.t for r in recs])
        E = np.array([r.E for r in recs])
        try:
            fit = dg.decay_rate_fit(t, E, (0.5 * T, T))
            ok = fit.rate > 0 and fit.r_squared >= tol
            results.append(CheckResult("decay_fit", "PASS" if ok else "FAIL", fit.r_squared, tol,
                                       f"rate={fit.rate:.4g}"))
        except ValueError as exc:
            results.append(CheckResult("decay_fit", "FAIL", math.nan, tol, str(exc)))
    if "h_functional" in names:
        tol = _tol(tols, "h_functional")
        if p.theta == 0:
            results.append(CheckResult("h_functional", "SKIPPED", math.nan, tol, "theta = 0"))
        else:
            ref = dy.discrete_equilibrium(p, cfg.N)
            h0 = dg.effective_velocity_H(traj.states[0], ref, p).l2
            h1 = dg.effective_velocity_H(traj.states[-1], ref, p).l2
            ratio = h1 / h0 if h0 > 0 else 0.0
            results.append(CheckResult("h_functional", "PASS" if ratio <= tol else "FAIL", ratio, tol,
                                       "int H^2 at t_end relative to t=0"))
    return results


def format_table(results) -> str:
    lines = [f"{'check':<24}{'status':<9}{'value':>14}{'tol':>12}  detail"]
    for r in results:
        lines.append(f"{r.name:<24}{r.status:<9}{r.value:>14.6g}{r.tol:>12.3g}  {r.detail}")
    return "\n".join(lines)
