import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sphereflow import diagnostics as dg
from sphereflow import dynamics as dy
from sphereflow.model import NO_FORCING, ForcingSpec, ModelParams, ParameterError
from sphereflow.verify import random_state, random_valid_params


def _random(seed, N=40, p=None):
    rng = np.random.default_rng(seed)
    p = p or random_valid_params(rng)
    return p, random_state(p, N, rng, rho_amp=0.2, u_amp=0.3)


def _energy_rate(state, d, p):
    """d/dt of kinetic + lumped potential energy along the derivative ``d``."""
    n, h, N = p.n, state.h, state.N
    rho, u, r = state.rho, state.u, state.r
    dE = h * np.sum(u[1 : N + 1] * d.du[1 : N + 1])
    dS = h * np.sum((p.A * rho ** (p.gamma - 2) - p.P_inf / rho ** 2) * d.drho)
    xj = h * np.arange(1, N + 1)
    dS += h * np.sum(p.G * xj * r[1 : N + 1] ** (1 - n) * d.dr[1 : N + 1])
    return dE + dS


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_semi_discrete_energy_law_exact(seed):
    p, s = _random(seed)
    fs = ForcingSpec("exp_decay", 0.3, 1.0, "exp_decay", 0.2, 1.0)
    s = dy.state_from_cells(p, s.rho, s.u, fs)
    d = dy.rhs(s, p, fs)
    lhs = _energy_rate(s, d, p)
    rhs = -dg.scheme_dissipation(s, p) + dg.work_rate(s, p, fs)
    scale = abs(dg.scheme_dissipation(s, p)) + abs(dg.work_rate(s, p, fs)) + 1e-30
    assert abs(lhs - rhs) <= 1e-11 * scale


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_volume_identity_rate_exact(seed):
    p, s = _random(seed)
    d = dy.rhs(s, p)
    n, h = p.n, s.h
    # d/dt r_{i+1}**n = -n h sum_{l<=i} drho_l / rho_l**2
    lhs = n * s.r[1:] ** (n - 1) * d.dr[1:]
    rhs = -n * h * np.cumsum(d.drho / s.rho ** 2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(rhs)))
    assert d.dr[0] == 0.0 and d.du[0] == 0.0


def test_closure_consistent_with_rhs():
    p, s = _random(7)
    d = dy.rhs(s, p)
    assert d.u_boundary == pytest.approx(dy.closure_velocity(s, p), rel=1e-14)


def test_discrete_equilibrium_is_rest_state():
    p = ModelParams()
    s = dy.discrete_equilibrium(p, 200)
    d = dy.rhs(s, p)
    assert np.max(np.abs(d.du)) < 1e-12
    assert np.max(np.abs(d.drho)) < 1e-12
    assert p.A * s.rho[-1] ** p.gamma == pytest.approx(p.P_inf, rel=1e-12)


def test_uniform_equilibrium_preserved():
    p = ModelParams(G=0, gamma=2, A=1, P_inf=4)
    s = dy.state_from_cells(p, np.full(101, 2.0), np.zeros(101))
    out = dy.integrate_steps(s, p, NO_FORCING, 500)
    assert np.max(np.abs(out.rho - s.rho)) <= 1e-13
    assert np.max(np.abs(out.r - s.r)) <= 1e-13
    assert np.max(np.abs(out.u)) <= 1e-13


def test_volume_compatibility_after_steps():
    p, s = _random(3, N=64)
    out = dy.integrate_steps(s, p, ForcingSpec(), 300, dt_safety=0.1)
    assert out.t > 0
    assert dy.volume_residual(out, p.n) <= 1e-11


def test_step_and_advance():
    p, s = _random(11)
    dt = 0.2 * dy.stable_dt(s, p)
    one = dy.step(s, p, ForcingSpec(), dt)
    assert one.t == pytest.approx(dt)
    new, steps = dy.advance(s, p, ForcingSpec(), 10 * dt, dt_safety=0.2)
    assert new.t == pytest.approx(10 * dt) and steps >= 10
    with pytest.raises(ValueError):
        dy.step(s, p, ForcingSpec(), 0.0)


def test_rk4_fourth_order_in_time():
    p, s = _random(5, N=32)
    T = 20 * dy.stable_dt(s, p, 0.05)
    ref = dy.advance(s, p, ForcingSpec(), T, dt_safety=0.0125)[0]
    errs = []
    for safety in (0.1, 0.05):
        out = dy.advance(s, p, ForcingSpec(), T, dt_safety=safety)[0]
        errs.append(np.max(np.abs(out.u - ref.u)))
    assert errs[0] / errs[1] > 10.0


def test_stable_dt_formula():
    p = ModelParams(theta=0.0, G=0)
    s = dy.state_from_cells(p, np.full(33, 1.0), np.zeros(33))
    h, n = s.h, 3
    r = s.r[1:]
    cs = np.sqrt(p.gamma * p.A)
    expect = h * h / np.max((2 * p.c1 + p.c2) * r ** (2 * n - 2) + h * cs * r ** (n - 1))
    assert dy.stable_dt(s, p) == pytest.approx(expect, rel=1e-12)
    with pytest.raises(ValueError):
        dy.stable_dt(s, p, 0.0)


def test_abort_on_converging_flow():
    p = ModelParams(G=0, P_inf=0.01, c1=0.05, c2=0.05)
    x = np.linspace(0, 1, 33)
    s = dy.state_from_cells(p, np.ones(33), -50 * np.sin(np.pi * x) ** 8)
    cfg = dy.SimConfig(params=p, N=32, t_end=1, snapshot_every=0.01, dt_safety=1.0,
                       initial_data=dy.InitialData(kind="uniform"))
    with pytest.raises(dy.SimulationAbort) as info:
        dy.simulate(cfg, state=s)
    exc = info.value
    assert exc.reason == "positivity lost"
    assert exc.trajectory is not None and len(exc.trajectory.states) >= 1
    assert exc.rho_min > 0 and exc.t > 0


def test_step_budget_abort():
    cfg = dy.SimConfig(N=32, t_end=1.0, max_steps=5)
    with pytest.raises(dy.SimulationAbort) as info:
        dy.simulate(cfg)
    assert info.value.reason == "step budget exhausted"


def test_simulate_snapshots_and_records():
    cfg = dy.SimConfig(N=32, t_end=0.05, snapshot_every=0.02)
    traj = dy.simulate(cfg)
    assert np.allclose(traj.times, [0, 0.02, 0.04, 0.05])
    assert len(traj.records) == 4 and traj.steps > 0
    assert traj.records[0].diss_integral == 0.0
    assert np.all(np.diff(traj.series("diss_integral")) > 0)
    again = dy.simulate(cfg)
    assert all(a.fields_equal(b) for a, b in zip(traj.states, again.states))


def test_snapshot_times():
    assert np.allclose(dy.snapshot_times(1.0, 0.25), [0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(dy.snapshot_times(1.0, 0.3), [0, 0.3, 0.6, 0.9, 1.0])
    assert np.allclose(dy.snapshot_times(0.0, 0.1), [0.0])


def test_config_validation():
    with pytest.raises(ValueError):
        dy.SimConfig(N=4)
    with pytest.raises(ValueError):
        dy.SimConfig(dt_safety=1.5)
    with pytest.raises(ValueError):
        dy.InitialData(kind="wave")
    with pytest.raises(ValueError):
        dy.InitialData(kind="custom")
    with pytest.raises(ParameterError):
        dy.init_state(dy.SimConfig(params=ModelParams(c1=1, c2=-1)))


def test_initial_kinds():
    p = ModelParams()
    N = 64
    eq = dy.init_state(dy.SimConfig(N=N, initial_data=dy.InitialData(kind="equilibrium")))
    ref = dy.discrete_equilibrium(p, N)
    assert np.array_equal(eq.rho, ref.rho) and np.array_equal(eq.r, ref.r)
    assert np.max(np.abs(eq.u)) < 1e-14
    pert = dy.init_state(dy.SimConfig(N=N, initial_data=dy.InitialData(amp=0.01)))
    ratio = pert.rho / eq.rho - 1
    assert ratio[0] == pytest.approx(0.01) and ratio[-1] == pytest.approx(-0.01)
    st_ = dy.init_state(dy.SimConfig(N=N, initial_data=dy.InitialData(kind="stationary")))
    # first-order gap between the continuous profile and the discrete rest state
    assert np.max(np.abs(st_.rho / eq.rho - 1)) < 3e-2
    un = dy.init_state(dy.SimConfig(N=N, initial_data=dy.InitialData(kind="uniform", rho0=3.0)))
    assert np.all(un.rho == 3.0)


def test_custom_initial_file(tmp_path):
    path = tmp_path / "init.csv"
    x = np.linspace(0, 1, 11)
    np.savetxt(path, np.column_stack([x, 1 + x, 0.5 * x]), delimiter=",",
               header="x,rho0,u0", comments="")
    rho, u = dy.read_custom_initial(path, 1.0, 20)
    # averages of a linear function are the midpoint values
    mids = (np.arange(20) + 0.5) / 20
    assert np.allclose(rho[1:], 1 + mids, atol=1e-14)
    assert rho[0] == rho[1] and u[0] == 0.0
    bad = tmp_path / "bad.csv"
    np.savetxt(bad, np.column_stack([x[::-1], 1 + x, x]), delimiter=",",
               header="x,rho0,u0", comments="")
    with pytest.raises(ValueError):
        dy.read_custom_initial(bad, 1.0, 20)


def test_reconstruct_exact_on_nodes():
    p, s = _random(2, N=32)
    rho, u, r = dy.reconstruct(s, s.x, p.n)
    assert np.allclose(rho, s.rho) and np.allclose(u, s.u[:33]) and np.allclose(r, s.r[:33])
    with pytest.raises(ValueError):
        dy.reconstruct(s, [1.5], p.n)
