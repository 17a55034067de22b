"""Semi-discrete free-boundary scheme in mass coordinates and its time loop.

Unknowns on ``x_j = j h``, ``h = M / N``: cell densities ``rho_0..rho_N``,
node velocities ``u_0..u_{N+1}`` and node radii ``r_0..r_{N+1}``, with
``u_0 = 0`` and ``r_0**n = h``.  The outer velocity ``u_{N+1}`` is not
evolved; it is fixed at every stage by the traction balance at the free
surface.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import optimize

from ._backend import kernels
from ._pykernels import OK, POSITIVITY_FAILURE, STEP_BUDGET
from .model import NO_FORCING, ForcingSpec, ModelParams, ParameterError, validate_params

__all__ = [
    "DiscreteState",
    "InitialData",
    "SimConfig",
    "Derivatives",
    "Trajectory",
    "SimulationAbort",
    "pack_params",
    "volume_residual",
    "discrete_equilibrium",
    "state_from_cells",
    "init_state",
    "closure_velocity",
    "rhs",
    "stable_dt",
    "step",
    "advance",
    "integrate_steps",
    "simulate",
    "reconstruct",
]

MIN_N = 16
MAX_HALVINGS = 20


@dataclass(frozen=True, eq=False)
class DiscreteState:
    t: float
    h: float
    rho: np.ndarray
    u: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        N = self.rho.shape[0] - 1
        if self.u.shape != (N + 2,) or self.r.shape != (N + 2,):
            raise ValueError("state arrays must have lengths N+1, N+2, N+2")

    @property
    def N(self) -> int:
        return self.rho.shape[0] - 1

    @property
    def x(self) -> np.ndarray:
        """Node mass coordinates ``x_0..x_N``."""
        return self.h * np.arange(self.N + 1)

    @property
    def boundary_radius(self) -> float:
        return float(self.r[-1])

    def copy(self) -> "DiscreteState":
        return DiscreteState(self.t, self.h, self.rho.copy(), self.u.copy(), self.r.copy())

    def fields_equal(self, other: "DiscreteState") -> bool:
        return (np.array_equal(self.rho, other.rho) and np.array_equal(self.u, other.u)
                and np.array_equal(self.r, other.r))


INITIAL_KINDS = ("stationary", "equilibrium", "perturbed_stationary", "uniform", "custom")


@dataclass(frozen=True)
class InitialData:
    """Choice of initial data.

    ``stationary``: cell averages of the hydrostatic profile, at rest.
    ``equilibrium``: the exact rest state of the discrete scheme.
    ``perturbed_stationary``: ``(1 + amp cos(mode pi x_j / M))`` times the
    discrete rest state.  ``uniform``: constant ``rho0`` at rest.
    ``custom``: CSV file with columns ``x,rho0,u0``.
    """

    kind: str = "perturbed_stationary"
    amp: float = 1e-3
    mode: int = 1
    rho0: float = 1.0
    file: str | None = None

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"unknown initial data kind {self.kind!r}")
        if self.kind == "uniform" and not self.rho0 > 0:
            raise ValueError("uniform initial density must be positive")
        if self.kind == "custom" and not self.file:
            raise ValueError("custom initial data needs a file")


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams = field(default_factory=ModelParams)
    forcing: ForcingSpec = NO_FORCING
    N: int = 200
    t_end: float = 1.0
    dt_safety: float = 0.25
    snapshot_every: float = 0.1
    initial_data: InitialData = field(default_factory=InitialData)
    max_steps: int = 10**9

    def __post_init__(self):
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if self.N < MIN_N:
            raise ValueError(f"N must be at least {MIN_N}")
        if not 0 < self.dt_safety <= 1:
            raise ValueError("dt_safety must lie in (0, 1]")
        if not self.snapshot_every > 0:
            raise ValueError("snapshot_every must be positive")

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)


class Derivatives(NamedTuple):
    drho: np.ndarray
    du: np.ndarray
    dr: np.ndarray
    u_boundary: float


class SimulationAbort(RuntimeError):
    """Positivity was lost or the step budget ran out."""

    def __init__(self, reason: str, t: float, state: DiscreteState, trajectory=None):
        self.reason = reason
        self.t = t
        self.state = state
        self.trajectory = trajectory
        self.rho_min = float(np.min(state.rho))
        self.rho_max = float(np.max(state.rho))
        super().__init__(f"{reason} at t={t:.6g} (rho in [{self.rho_min:.3e}, {self.rho_max:.3e}])")


def pack_params(p: ModelParams, forcing: ForcingSpec = NO_FORCING) -> np.ndarray:
    return np.array([p.n, p.gamma, p.A, p.theta, p.c1, p.c2, p.G, p.P_inf, p.M,
                     *forcing.packed()], dtype=float)


def volume_residual(state: DiscreteState, n: int) -> float:
    """``max_i |r_{i+1}**n - h - n sum_{l<=i} h/rho_l|`` (also ``r_0**n - h``)."""
    h = state.h
    target = h + n * h * np.concatenate(([0.0], np.cumsum(1.0 / state.rho)))
    return float(np.max(np.abs(state.r ** n - target)))


def _radii(rho, h, n):
    rn = h + n * h * np.concatenate(([0.0], np.cumsum(1.0 / rho)))
    return rn ** (1.0 / n)


def _equilibrium_march(p: ModelParams, N: int, sigma: float, P_end: float):
    """Rest state of the scheme from ``rho_0 = sigma``; returns ``(rho, g)``.

    ``g = P_N - P_end``, or ``-P_end`` if the pressure hits zero first.
    """
    n, h = p.n, p.M / N
    rho = np.empty(N + 1)
    rho[0] = sigma
    P = p.A * sigma ** p.gamma
    rn = h
    for j in range(1, N + 1):
        rn += n * h / rho[j - 1]
        P -= p.G * j * h * h / rn ** ((2.0 * n - 2.0) / n)
        if P <= 0:
            return rho, -P_end
        rho[j] = (P / p.A) ** (1.0 / p.gamma)
    return rho, P - P_end


@functools.lru_cache(maxsize=32)
def _equilibrium_rho(p: ModelParams, N: int) -> np.ndarray:
    g = lambda s: _equilibrium_march(p, N, s, p.P_inf)[1]
    lo = p.rho_edge
    if p.G == 0 or g(lo) >= 0:
        rho = np.full(N + 1, lo)
    else:
        hi = 2.0 * lo
        for _ in range(60):
            if g(hi) >= 0:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise RuntimeError("discrete rest state not bracketed")
        sigma = optimize.brentq(g, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps,
                                maxiter=200)
        rho = _equilibrium_march(p, N, sigma, p.P_inf)[0]
    rho.setflags(write=False)
    return rho


def discrete_equilibrium(p: ModelParams, N: int) -> DiscreteState:
    """Exact rest state of the semi-discrete scheme with ``P_Gamma = P_inf``.

    Marching the discrete momentum balance with ``u = 0`` outward from
    ``rho_0`` gives each cell pressure from the previous one; ``rho_0`` is
    tuned so the last cell pressure equals ``P_inf``.
    """
    rho = np.array(_equilibrium_rho(p, int(N)))
    h = p.M / N
    return DiscreteState(0.0, h, rho, np.zeros(N + 2), _radii(rho, h, p.n))


def state_from_cells(p: ModelParams, rho, u, forcing: ForcingSpec = NO_FORCING,
                     t: float = 0.0) -> DiscreteState:
    """Assemble a state from ``rho_0..rho_N`` and ``u_0..u_N``.

    Radii come from the volume identity; ``u_{N+1}`` from the closure.
    """
    rho = np.array(rho, dtype=float)
    N = rho.size - 1
    if np.any(~(rho > 0)):
        raise ValueError("initial density must be positive")
    u = np.asarray(u, dtype=float)
    if u.size not in (N + 1, N + 2):
        raise ValueError("velocity must have N+1 or N+2 entries")
    h = p.M / N
    uu = np.zeros(N + 2)
    uu[1 : N + 1] = u[1 : N + 1]
    r = _radii(rho, h, p.n)
    state = DiscreteState(t, h, rho, uu, r)
    uu[N + 1] = closure_velocity(state, p, forcing, t)
    return state


def _cell_averages(xs, vals, M, N):
    """Exact averages of the piecewise-linear interpolant over ``[(j-1)h, jh]``."""
    edges = np.linspace(0.0, M, N + 1)
    grid = np.union1d(xs, edges)
    v = np.interp(grid, xs, vals)
    F = np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(grid))))
    Fe = np.interp(edges, grid, F)
    avg = np.diff(Fe) / (M / N)
    return np.concatenate(([avg[0]], avg))  # cell 0 copies cell 1


def read_custom_initial(path, M: float, N: int):
    data = np.genfromtxt(path, delimiter=",", names=True)
    try:
        xs, rho0, u0 = (np.atleast_1d(data[k]).astype(float) for k in ("x", "rho0", "u0"))
    except (ValueError, KeyError) as exc:
        raise ValueError(f"{path}: expected columns x,rho0,u0") from exc
    if xs.size < 2:
        raise ValueError(f"{path}: need at least two rows")
    if np.any(np.diff(xs) <= 0):
        raise ValueError(f"{path}: x must be strictly increasing")
    if xs[0] > 0 or xs[-1] < M * (1 - 1e-12):
        raise ValueError(f"{path}: x must cover [0, M]")
    if np.any(~(rho0 > 0)):
        raise ValueError(f"{path}: nonpositive density")
    rho = _cell_averages(xs, rho0, M, N)
    u = _cell_averages(xs, u0, M, N)
    u[0] = 0.0
    return rho, u


def init_state(config: SimConfig) -> DiscreteState:
    p, N = config.params, config.N
    report = validate_params(p)
    if not report.ok:
        raise ParameterError(report)
    init = config.initial_data
    zeros = np.zeros(N + 1)
    if init.kind == "uniform":
        rho, u = np.full(N + 1, init.rho0), zeros
    elif init.kind == "equilibrium":
        rho, u = discrete_equilibrium(p, N).rho, zeros
    elif init.kind == "perturbed_stationary":
        base = discrete_equilibrium(p, N).rho
        xj = (p.M / N) * np.arange(N + 1)
        rho, u = (1.0 + init.amp * np.cos(init.mode * math.pi * xj / p.M)) * base, zeros
    elif init.kind == "stationary":
        from .stationary import shoot

        prof = shoot(p, N)
        rho = np.concatenate(([0.0], 0.5 * (prof.rho[1:] + prof.rho[:-1])))
        rho[0] = rho[1]
        u = zeros
    else:
        rho, u = read_custom_initial(Path(init.file), p.M, N)
    return state_from_cells(p, rho, u, config.forcing, 0.0)


# --- scheme -------------------------------------------------------------

def closure_velocity(state: DiscreteState, p: ModelParams, forcing: ForcingSpec = NO_FORCING,
                     t: float | None = None) -> float:
    """Outer velocity ``u_{N+1}`` from the free-surface traction balance."""
    t = state.t if t is None else t
    N, h = state.N, state.h
    rn = state.rho[N]
    k = (2 * p.c1 + p.c2) * rn ** p.theta * rn
    rb = state.r[N + 1]
    a = -k * rb ** (p.n - 1) / h + 2 * (p.n - 1) * p.c1 * rn ** p.theta / rb
    if abs(a) < 1e-300:
        raise ZeroDivisionError("degenerate boundary closure")
    return float(kernels.closure_velocity(pack_params(p, forcing), h, float(t),
                                          state.rho, state.u, state.r))


def rhs(state: DiscreteState, p: ModelParams, forcing: ForcingSpec = NO_FORCING,
        t: float | None = None) -> Derivatives:
    """Time derivatives of the scheme at ``state``; ``u_{N+1}`` is refreshed first."""
    t = state.t if t is None else t
    if np.any(~(state.rho > 0)):
        raise ValueError("nonpositive density")
    N = state.N
    drho, du, dr = np.empty(N + 1), np.empty(N + 2), np.empty(N + 2)
    ub = kernels.scheme_rhs(pack_params(p, forcing), state.h, float(t), state.rho,
                            np.ascontiguousarray(state.u, dtype=float), state.r, drho, du, dr)
    return Derivatives(drho, du, dr, float(ub))


def stable_dt(state: DiscreteState, p: ModelParams, safety: float = 1.0) -> float:
    """``safety h**2 / max_j[(2c1+c2) rho**(1+theta) r**(2n-2) + h c_s rho r**(n-1)]``.

    The radius is taken at the outer node of each cell.
    """
    if not safety > 0:
        raise ValueError("safety must be positive")
    return float(kernels.stable_dt(pack_params(p), state.h, state.rho, state.r, float(safety)))


def _run(state, p, forcing, t_target, dt_safety, max_steps, acc=None):
    rho, u, r = state.rho.copy(), state.u.copy(), state.r.copy()
    t, steps, status, halvings = kernels.advance(
        pack_params(p, forcing), state.h, rho, u, r, float(state.t), float(t_target),
        float(dt_safety), MAX_HALVINGS, int(max_steps), acc)
    return DiscreteState(float(t), state.h, rho, u, r), int(steps), int(status)


def step(state: DiscreteState, p: ModelParams, forcing: ForcingSpec, dt: float) -> DiscreteState:
    """One classical RK4 step of size ``dt``.

    A step whose stages lose positivity is retried with halved ``dt`` (the
    remainder is then covered by further steps); after 20 halvings the step
    is abandoned with :class:`SimulationAbort`.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    new, _, status = _run(state, p, forcing, state.t + dt, math.inf, 10**9)
    if status != OK:
        raise SimulationAbort("positivity lost", new.t, new)
    return new


def advance(state: DiscreteState, p: ModelParams, forcing: ForcingSpec, t_target: float,
            dt_safety: float = 0.25, max_steps: int = 10**9):
    """Integrate to ``t_target`` with the adaptive stable step.

    Returns ``(state, steps)``; raises :class:`SimulationAbort` on failure.
    """
    new, steps, status = _run(state, p, forcing, t_target, dt_safety, max_steps)
    if status == POSITIVITY_FAILURE:
        raise SimulationAbort("positivity lost", new.t, new)
    if status == STEP_BUDGET:
        raise SimulationAbort("step budget exhausted", new.t, new)
    return new, steps


def integrate_steps(state: DiscreteState, p: ModelParams, forcing: ForcingSpec, steps: int,
                    dt_safety: float = 0.25) -> DiscreteState:
    """Take exactly ``steps`` adaptive RK4 steps (no output-time clipping)."""
    new, taken, status = _run(state, p, forcing, 1e300, dt_safety, steps)
    if status == POSITIVITY_FAILURE:
        raise SimulationAbort("positivity lost", new.t, new)
    return new


@dataclass
class Trajectory:
    config: SimConfig
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)
    steps: int = 0
    status: str = "ok"

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])


def snapshot_times(t_end: float, every: float) -> np.ndarray:
    k = int(math.floor(t_end / every + 1e-9))
    ts = every * np.arange(k + 1)
    if t_end - ts[-1] > 1e-12 * max(1.0, t_end):
        ts = np.append(ts, t_end)
    return ts


def simulate(config: SimConfig, reference=None, diagnostics: bool = True,
             state: DiscreteState | None = None) -> Trajectory:
    """Run the configured simulation, recording a snapshot per output time.

    ``reference`` is the rest state used by the diagnostics (by default the
    discrete equilibrium for ``config.params`` on ``config.N`` cells).
    ``state`` overrides the configured initial data.
    """
    from . import diagnostics as diag

    p, forcing = config.params, config.forcing
    if state is None:
        state = init_state(config)
    elif state.N != config.N:
        raise ValueError("initial state does not match config.N")
    if diagnostics and reference is None:
        reference = discrete_equilibrium(p, config.N)
    traj = Trajectory(config)
    energy = diag.EnergyAccumulator(p, forcing, reference) if diagnostics else None
    # running time integrals of dissipation and perturbation power
    integrals = np.zeros(2) if diagnostics else None

    def record(s):
        traj.states.append(s)
        if energy is not None:
            traj.records.append(energy.push(s, integrals[0], integrals[1]))

    record(state)
    for t_next in snapshot_times(config.t_end, config.snapshot_every)[1:]:
        new, steps, status = _run(state, p, forcing, t_next, config.dt_safety,
                                  config.max_steps - traj.steps, integrals)
        traj.steps += steps
        if status != OK:
            traj.status = "aborted"
            reason = "positivity lost" if status == POSITIVITY_FAILURE else "step budget exhausted"
            raise SimulationAbort(reason, new.t, new, traj)
        state = new
        record(state)
    return traj


def reconstruct(state: DiscreteState, x, n: int):
    """Piecewise-linear continuous fields at mass coordinates ``x``.

    ``rho`` and ``u`` are linear between the values attached to ``x_j``;
    ``r`` is linear in ``r**n``.
    """
    x = np.asarray(x, dtype=float)
    M = state.h * state.N
    if np.any(x < 0) or np.any(x > M * (1 + 1e-12)):
        raise ValueError("x outside [0, M]")
    N = state.N
    s = np.clip(x / state.h, 0.0, N)
    j = np.minimum(np.floor(s).astype(int), N - 1)
    w = s - j
    rho = (1 - w) * state.rho[j] + w * state.rho[j + 1]
    u = (1 - w) * state.u[j] + w * state.u[j + 1]
    rn = (1 - w) * state.r[j] ** n + w * state.r[j + 1] ** n
    return rho, u, rn ** (1.0 / n)
