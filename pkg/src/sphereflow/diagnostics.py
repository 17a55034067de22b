"""Monitored functionals of discrete states and post-processing of runs.

The reference for deviation measures is the exact rest state of the scheme
on the same grid (see :func:`sphereflow.dynamics.discrete_equilibrium`);
passing a :class:`~sphereflow.stationary.StationaryProfile` selects the rest
state for its parameters, which must share the state's grid.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import DiscreteState, SimConfig, discrete_equilibrium, reconstruct, simulate, volume_residual
from .model import NO_FORCING, ForcingSpec, ModelParams

__all__ = [
    "DiagnosticsRecord",
    "DecayFit",
    "EnergyAccumulator",
    "kinetic_energy",
    "dissipation",
    "scheme_dissipation",
    "discrete_potential",
    "work_rate",
    "lyapunov_V1",
    "energy_balance_residual",
    "weighted_B",
    "sup_indicator_I",
    "density_bounds_ok",
    "effective_velocity_H",
    "decay_rate_fit",
    "gronwall_constant",
    "continuous_dependence_metric",
    "convergence_study",
    "ConvergenceResult",
]


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    E: float
    V1: float
    D: float
    B: float
    I_sup: float
    mass_vol_residual: float
    energy_residual: float
    rho_min: float
    rho_max: float
    boundary_radius: float
    u_over_r_sup: float
    work_rate: float = 0.0
    D_scheme: float = 0.0
    in_bounds: bool = True
    diss_integral: float = math.nan  # int_0^t D, integrated along with the state
    work_integral: float = math.nan

    CSV_FIELDS = ("t", "E", "V1", "D", "B", "I_sup", "mass_vol_residual", "energy_residual",
                  "rho_min", "rho_max", "boundary_radius")

    def as_row(self):
        return [getattr(self, k) for k in self.CSV_FIELDS]


@dataclass(frozen=True)
class DecayFit:
    window: tuple
    rate: float
    intercept: float
    r_squared: float
    samples: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _reference(stationary, p: ModelParams, N: int) -> DiscreteState:
    if isinstance(stationary, DiscreteState):
        ref = stationary
    else:
        if getattr(stationary, "N", N) != N:
            raise ValueError(f"grid mismatch: reference N={stationary.N}, state N={N}")
        ref = discrete_equilibrium(stationary.params if hasattr(stationary, "params") else p, N)
    if ref.N != N:
        raise ValueError(f"grid mismatch: reference N={ref.N}, state N={N}")
    return ref


def kinetic_energy(state: DiscreteState) -> float:
    """``sum_{j=1}^{N} h u_j**2 / 2``, the kinetic part of the scheme's energy."""
    N = state.N
    return float(0.5 * state.h * np.sum(state.u[1 : N + 1] ** 2))


def _w(state, n):
    w = state.r ** (n - 1) * state.u
    w[0] = 0.0
    return w


def dissipation(state: DiscreteState, p: ModelParams) -> float:
    """Sum-of-squares dissipation, cellwise with the forward difference.

    ``(2c1/n + c2) rho**(1+theta) (delta w)**2
    + 2(n-1)/n c1 rho**(1+theta) (r**(n-1) delta u - u/(r rho))**2``
    on each cell, with ``w = r**(n-1) u`` and cell-centred ``r``, ``u``.
    """
    n, h = p.n, state.h
    rho, u, r = state.rho, state.u, state.r
    k = rho ** (1.0 + p.theta)
    dw = np.diff(_w(state, n)) / h
    du = np.diff(u) / h
    rc = (0.5 * (r[1:] ** n + r[:-1] ** n)) ** (1.0 / n)
    uc = 0.5 * (u[1:] + u[:-1])
    shear = rc ** (n - 1) * du - uc / (rc * rho)
    dens = (2 * p.c1 / n + p.c2) * k * dw ** 2 + 2 * (n - 1) / n * p.c1 * k * shear ** 2
    return float(h * np.sum(dens))


def scheme_dissipation(state: DiscreteState, p: ModelParams) -> float:
    """The dissipation that the scheme's energy balances exactly.

    ``sum_i h [rho_i (lambda_i + 2 mu_i) (delta w_i)**2
    - 2(n-1) mu_i delta(r_i**(n-2) u_i**2)]``.
    """
    n, h = p.n, state.h
    rho, u, r = state.rho, state.u, state.r
    rt = rho ** p.theta
    dw = np.diff(_w(state, n)) / h
    d2 = np.diff(r ** (n - 2) * u * u) / h
    return float(h * np.sum((2 * p.c1 + p.c2) * rt * rho * dw ** 2
                            - 2 * (n - 1) * p.c1 * rt * d2))


def _gravity_potential(n, V):
    if n == 2:
        return 0.5 * np.log(V)
    e = (2.0 - n) / n
    return n ** ((2.0 - 2.0 * n) / n) * (n / (2.0 - n)) * (V ** e - 1.0)


def discrete_potential(state: DiscreteState, p: ModelParams) -> float:
    """Lumped static potential energy of the scheme, ``S_h``."""
    n, h, N = p.n, state.h, state.N
    rho = state.rho
    internal = p.A * rho ** (p.gamma - 1.0) / (p.gamma - 1.0) + p.P_inf / rho
    total = h * np.sum(internal)
    if p.G != 0:
        xj = h * np.arange(1, N + 1)
        V = state.r[1 : N + 1] ** n / n
        total += h * np.sum(p.G * xj * _gravity_potential(n, V))
    return float(total)


def work_rate(state: DiscreteState, p: ModelParams, forcing: ForcingSpec = NO_FORCING,
              t: float | None = None) -> float:
    """Power of the perturbations: ``-dP w_{N+1} - sum_j h df_j u_j``."""
    t = state.t if t is None else t
    n, h, N = p.n, state.h, state.N
    out = -float(forcing.delta_P(t)) * state.r[N + 1] ** (n - 1) * state.u[N + 1]
    if forcing.active_force_amp != 0.0:
        xj = h * np.arange(1, N + 1)
        df = forcing.delta_f(xj, state.r[1 : N + 1], t, p.M)
        out -= h * float(np.sum(df * state.u[1 : N + 1]))
    return float(out)


def lyapunov_V1(state: DiscreteState, stationary, p: ModelParams) -> float:
    """Kinetic energy plus ``S_h[V] - S_h[V_inf]`` with ``V = r**n / n``."""
    ref = _reference(stationary, p, state.N)
    return kinetic_energy(state) + discrete_potential(state, p) - discrete_potential(ref, p)


def weighted_B(state: DiscreteState, stationary, p: ModelParams) -> float:
    """Five-term weighted deviation functional with ``alpha = 3/2 - n``.

    Derivatives in ``x`` by ``np.gradient`` (centred, one-sided at the ends),
    integrals by the trapezoid rule over nodes ``0..N``.
    """
    ref = _reference(stationary, p, state.N)
    n, h, N = p.n, state.h, state.N
    a = p.alpha
    rho, rinf = state.rho, ref.rho
    r = state.r[: N + 1]
    u = state.u[: N + 1]
    drho = rho - rinf
    d_drho = np.gradient(drho, h)
    du = np.gradient(u, h)
    flux = rho ** (1.0 + p.theta) * np.gradient(r ** (n - 1) * u, h)
    dflux = np.gradient(flux, h)
    ur = u / r
    dens = (drho ** 2 + r ** (2 * n - 2 + a) * d_drho ** 2 + ur ** 2
            + r ** (2 * n - 2) * du ** 2 + r ** (2 * n - 2 + a) * dflux ** 2)
    return float(np.trapezoid(dens, dx=h))


def sup_indicator_I(state: DiscreteState, stationary, p: ModelParams | None = None) -> float:
    """``max|rho - rho_inf| + max|u/r|``."""
    p = p if p is not None else getattr(stationary, "params", None)
    ref = stationary if isinstance(stationary, DiscreteState) else _reference(stationary, p, state.N)
    if ref.N != state.N:
        raise ValueError("grid mismatch")
    return float(np.max(np.abs(state.rho - ref.rho)) + np.max(np.abs(state.u / state.r)))


def density_bounds_ok(state: DiscreteState, stationary, p: ModelParams | None = None) -> bool:
    """Whether ``rho`` lies in ``[min(rho_inf)/2, 3 max(rho_inf)/2]``."""
    p = p if p is not None else getattr(stationary, "params", None)
    ref = stationary if isinstance(stationary, DiscreteState) else _reference(stationary, p, state.N)
    lo, hi = np.min(ref.rho), np.max(ref.rho)
    return bool(np.min(state.rho) >= 0.5 * lo and np.max(state.rho) <= 1.5 * hi)


class EffectiveVelocity(NamedTuple):
    H: np.ndarray
    l2: float


def effective_velocity_H(state: DiscreteState, stationary, p: ModelParams) -> EffectiveVelocity:
    """``H_j = u_j + (2c1+c2)/theta r_j**(n-1) delta(rho**theta - rho_inf**theta)``.

    Defined on nodes ``1..N`` (``H_0 = 0``); also returns ``sum h H_j**2``.
    """
    if p.theta == 0:
        raise ValueError("the effective velocity needs theta > 0")
    ref = _reference(stationary, p, state.N)
    n, h, N = p.n, state.h, state.N
    g = state.rho ** p.theta - ref.rho ** p.theta
    H = np.zeros(N + 1)
    H[1:] = state.u[1 : N + 1] + (2 * p.c1 + p.c2) / p.theta * state.r[1 : N + 1] ** (n - 1) * np.diff(g) / h
    return EffectiveVelocity(H, float(h * np.sum(H[1:] ** 2)))


class EnergyAccumulator:
    """Builds diagnostics records along a run and tracks the energy budget.

    The budget is ``V1(t) - V1(t0) + int D dt - int work dt``.  The time
    integrals are taken from the caller when supplied (the time loop
    integrates them with the state); otherwise the trapezoid rule over the
    pushed states is used.
    """

    def __init__(self, p: ModelParams, forcing: ForcingSpec, reference: DiscreteState):
        self.p = p
        self.forcing = forcing
        self.reference = reference
        self.S_ref = discrete_potential(reference, p)
        self.prev = None
        self.V1_0 = None
        self.int_D = 0.0
        self.int_W = 0.0

    def push(self, state: DiscreteState, int_D: float | None = None,
             int_W: float | None = None) -> DiagnosticsRecord:
        p, ref = self.p, self.reference
        E = kinetic_energy(state)
        V1 = E + discrete_potential(state, p) - self.S_ref
        D = dissipation(state, p)
        W = work_rate(state, p, self.forcing)
        if self.prev is None:
            self.V1_0 = V1
        if int_D is not None:
            self.int_D, self.int_W = float(int_D), float(int_W)
        elif self.prev is not None:
            dt = state.t - self.prev.t
            self.int_D += 0.5 * dt * (D + self.prev.D)
            self.int_W += 0.5 * dt * (W + self.prev.work_rate)
        rec = DiagnosticsRecord(
            t=state.t, E=E, V1=V1, D=D,
            B=weighted_B(state, ref, p),
            I_sup=sup_indicator_I(state, ref),
            mass_vol_residual=volume_residual(state, p.n),
            energy_residual=abs(V1 - self.V1_0 + self.int_D - self.int_W),
            rho_min=float(np.min(state.rho)), rho_max=float(np.max(state.rho)),
            boundary_radius=state.boundary_radius,
            u_over_r_sup=float(np.max(np.abs(state.u[1:] / state.r[1:]))),
            work_rate=W, D_scheme=scheme_dissipation(state, p),
            in_bounds=density_bounds_ok(state, ref),
            diss_integral=self.int_D, work_integral=self.int_W,
        )
        self.prev = rec
        return rec


def energy_balance_residual(records, p: ModelParams | None = None,
                            forcing: ForcingSpec | None = None, normalized: bool = True) -> float:
    """Energy budget defect over a window of records.

    ``|V1(t2) - V1(t1) + int D dt - int work dt|`` divided by ``int D dt``
    when that is positive (otherwise the absolute defect is returned).  The
    time integrals come from the running integrals stored in the records,
    or from the trapezoid rule over the records when those are missing.
    """
    records = list(records)
    if len(records) < 2:
        raise ValueError("need at least two records")
    first, last = records[0], records[-1]
    if math.isfinite(first.diss_integral) and math.isfinite(last.diss_integral):
        int_D = last.diss_integral - first.diss_integral
        int_W = last.work_integral - first.work_integral
    else:
        t = np.array([r.t for r in records])
        int_D = float(np.trapezoid([r.D for r in records], t))
        int_W = float(np.trapezoid([r.work_rate for r in records], t))
    defect = abs(records[-1].V1 - records[0].V1 + int_D - int_W)
    if normalized and int_D > 1e-300:
        return defect / int_D
    return defect


def decay_rate_fit(t, y, window=None) -> DecayFit:
    """Least-squares fit of ``ln y = c - a t``; ``rate = a``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        lo, hi = window
        sel = (t >= lo) & (t <= hi)
        t, y = t[sel], y[sel]
    if t.size < 10:
        raise ValueError("decay fit needs at least 10 samples in the window")
    if np.any(~(y > 0)):
        raise ValueError("decay fit needs positive samples")
    ly = np.log(y)
    slope, intercept = np.polyfit(t, ly, 1)
    fitted = intercept + slope * t
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 1e-300 else 1.0
    rate = -slope if abs(slope) > 1e-14 * max(1.0, abs(intercept)) else 0.0
    return DecayFit((float(t[0]), float(t[-1])), float(rate), float(intercept), float(r2), int(t.size))


def continuous_dependence_metric(s1: DiscreteState, s2: DiscreteState, n: int) -> float:
    """``int (u1-u2)**2 + (rho1-rho2)**2 + x**(-2/n) (r1-r2)**2 dx``.

    Trapezoid over nodes ``0..N``; the weight at ``x = 0`` uses ``x = h/2``.
    """
    if s1.N != s2.N or not math.isclose(s1.h, s2.h, rel_tol=1e-14):
        raise ValueError("grid mismatch")
    N, h = s1.N, s1.h
    x = h * np.arange(N + 1)
    x[0] = 0.5 * h
    dens = ((s1.u[: N + 1] - s2.u[: N + 1]) ** 2 + (s1.rho - s2.rho) ** 2
            + x ** (-2.0 / n) * (s1.r[: N + 1] - s2.r[: N + 1]) ** 2)
    return float(np.trapezoid(dens, dx=h))


def gronwall_constant(t, d) -> float:
    """Smallest ``C >= 0`` with ``d(t) <= d(0) exp(C t)`` on the samples."""
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    sel = t > 0
    if not np.any(sel):
        return 0.0
    return float(max(0.0, np.max(np.log(d[sel] / d[0]) / t[sel])))


@dataclass(frozen=True)
class ConvergenceResult:
    grids: tuple
    differences: dict     # field -> ||f_N - f_2N|| for consecutive grids
    errors: dict          # field -> ||f_N - f_finest|| for each non-finest grid
    orders: dict          # field -> log2(e_N / e_2N) from the errors (None when exact)
    pairwise_orders: dict  # field -> log2(d_N / d_2N) from consecutive differences
    exact: dict           # field -> True when differences sit at rounding level

    def table(self) -> list:
        """Rows ``(field, N, N_finest, error, order, pairwise_order, exact)``."""
        rows = []
        finest = self.grids[-1]
        for name in self.errors:
            for k, e in enumerate(self.errors[name]):
                order = self.orders[name][k - 1] if k >= 1 else None
                pair = self.pairwise_orders[name][k - 1] if k >= 1 else None
                rows.append((name, self.grids[k], finest, e, order, pair, self.exact[name]))
        return rows


def _final_state(config: SimConfig) -> DiscreteState:
    traj = simulate(config.replace(snapshot_every=max(config.t_end, 1e-300)), diagnostics=False)
    return traj.states[-1]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("SPHEREFLOW_THREADS", "1")))
    except ValueError:
        return 1


def convergence_study(config: SimConfig, grids) -> ConvergenceResult:
    """Self-convergence of ``rho``, ``u`` and ``r`` at ``config.t_end``.

    Every run is reconstructed on the coarsest grid's nodes and compared in
    the trapezoid-weighted L2 norm.  ``orders`` compare errors against the
    finest run, ``log2(|f_N - f_fine| / |f_2N - f_fine|)``; for a method of
    order ``p`` with three grids this tends to ``log2(2**p + 1)``.
    ``pairwise_orders`` use consecutive differences,
    ``log2(|f_N - f_2N| / |f_2N - f_4N|)``, which tend to ``p`` itself.
    """
    grids = tuple(int(g) for g in grids)
    if len(grids) < 3:
        raise ValueError("need at least three grids")
    if any(b != 2 * a for a, b in zip(grids, grids[1:])):
        raise ValueError("grids must be nested: each twice the previous")
    configs = [config.replace(N=g) for g in grids]
    workers = min(_workers(), len(grids))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            finals = list(pool.map(_final_state, configs))
    else:
        finals = [_final_state(c) for c in configs]
    p = config.params
    xs = np.linspace(0.0, p.M, grids[0] + 1)
    wts = np.full(xs.size, xs[1] - xs[0])
    wts[[0, -1]] *= 0.5
    fields = [dict(zip(("rho", "u", "r"), reconstruct(s, xs, p.n))) for s in finals]
    norm = lambda f: float(np.sqrt(np.sum(wts * f * f)))
    diffs, errs, orders, pairs, exact = {}, {}, {}, {}, {}
    ratio = lambda a, k: None if a[k + 1] == 0 else math.log2(a[k] / a[k + 1])
    for name in ("rho", "u", "r"):
        d = [norm(fields[k][name] - fields[k + 1][name]) for k in range(len(grids) - 1)]
        e = [norm(fields[k][name] - fields[-1][name]) for k in range(len(grids) - 1)]
        scale = max(norm(fields[-1][name]), 1e-300)
        is_exact = all(v <= 1e-12 * max(scale, 1.0) for v in d)
        n_ord = len(d) - 1
        orders[name] = [None if is_exact else ratio(e, k) for k in range(n_ord)]
        pairs[name] = [None if is_exact else ratio(d, k) for k in range(n_ord)]
        diffs[name], errs[name], exact[name] = d, e, is_exact
    return ConvergenceResult(grids, diffs, errs, orders, pairs, exact)
