"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or as a script.
"""

import math
import sys
import time

import numpy as np
import pytest

from sphereflow import diagnostics as dg
from sphereflow import dynamics as dy
from sphereflow.model import NO_FORCING, ForcingSpec, ModelParams
from sphereflow.stationary import fixed_point_solve, shoot, stability_min_eigen, verify_stationary_identity
from sphereflow.verify import random_state, random_valid_params

BENCH = ModelParams(n=3, gamma=5.0 / 3.0, A=1.0, G=1.0, M=1.0, P_inf=0.1)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def test_c01_analytic_stationary_limit(report):
    p = ModelParams(n=3, gamma=2.0, A=1.0, G=0.0, P_inf=4.0, M=1.0)
    t0 = time.perf_counter()
    prof = shoot(p, 2000)
    wall = time.perf_counter() - t0
    err_rho = float(np.max(np.abs(prof.rho - 2.0)))
    err_l = abs(prof.l_inf - 1.5 ** (1.0 / 3.0))
    ok = err_rho <= 1e-10 and err_l <= 1e-10 and wall < 1.0
    report(1, "analytic stationary limit", ok,
           f"|rho-2|={err_rho:.2e} |l-l_exact|={err_l:.2e} wall={wall:.3f}s")


def test_c02_cross_method_agreement(report):
    t0 = time.perf_counter()
    a = shoot(BENCH, 2000)
    b = fixed_point_solve(BENCH, 2000)
    wall = time.perf_counter() - t0
    rel = float(np.max(np.abs(a.rho - b.rho) / np.abs(a.rho)))
    ok = rel <= 1e-6 and wall < 10.0
    report(2, "shoot vs fixed point", ok, f"max rel diff={rel:.2e} wall={wall:.2f}s")


def test_c03_stationary_identity(report):
    r1 = verify_stationary_identity(shoot(BENCH, 1000))
    r2 = verify_stationary_identity(shoot(BENCH, 2000))
    ok = r2 <= 1e-6 and r2 <= 0.5 * r1
    report(3, "stationary identity", ok, f"residual N=1000 {r1:.2e}, N=2000 {r2:.2e}")


def test_c04_static_stability(report):
    critical = ModelParams(n=3, gamma=4.0 / 3.0, A=1.0, G=1.0, M=1.0, P_inf=0.1)
    assert critical.G * 3 ** (-1 / 3) * critical.M ** (2 / 3) < 2 * critical.A
    details, ok = [], True
    for name, p in (("gamma=5/3", BENCH), ("gamma=4/3", critical)):
        lam = np.array([stability_min_eigen(shoot(p, N)) for N in (500, 1000, 2000)])
        spread = float((lam.max() - lam.min()) / abs(lam[-1]))
        ok = ok and bool(np.all(lam > 0)) and spread <= 5e-4
        details.append(f"{name} lambda={lam[-1]:.6f} spread={spread:.1e}")
    report(4, "static stability", ok, "; ".join(details))


def test_c05_volume_compatibility(report):
    p = BENCH
    rng = np.random.default_rng(0)
    s = random_state(p, 200, rng, rho_amp=0.1, u_amp=0.01)
    out = dy.integrate_steps(s, p, NO_FORCING, 1000, dt_safety=0.1)
    res = dy.volume_residual(out, p.n)
    report(5, "volume compatibility", res <= 1e-10, f"max residual={res:.2e} after 1000 steps")


def test_c06_equilibrium_preservation(report):
    p = ModelParams(n=3, gamma=2.0, A=1.0, G=0.0, P_inf=4.0, M=1.0)
    s = dy.discrete_equilibrium(p, 100)
    out = dy.integrate_steps(s, p, NO_FORCING, 10_000)
    dev = max(float(np.max(np.abs(out.rho - s.rho))), float(np.max(np.abs(out.u - s.u))),
              float(np.max(np.abs(out.r - s.r))))
    report(6, "equilibrium preservation", dev <= 1e-13, f"max field change={dev:.1e} over 1e4 steps")


def _energy_run(N):
    cfg = dy.SimConfig(params=BENCH, N=N, t_end=0.1, snapshot_every=0.001, dt_safety=0.25,
                       initial_data=dy.InitialData(kind="perturbed_stationary", amp=1e-3))
    return dy.simulate(cfg)


def test_c07_energy_identity(report):
    coarse, fine = _energy_run(200), _energy_run(400)
    e1 = dg.energy_balance_residual(coarse.records)
    e2 = dg.energy_balance_residual(fine.records)
    t, V1 = fine.times, fine.series("V1")
    slope = float(np.max(np.diff(V1) / np.diff(t)))
    ok = e2 <= 1e-2 and e2 < e1 and slope <= 1e-8
    report(7, "energy identity", ok,
           f"residual N=200 {e1:.2e}, N=400 {e2:.2e}; max dV1/dt={slope:.2e}")


def test_c08_dissipation_positivity(report):
    rng = np.random.default_rng(0)
    worst, negative_c2 = math.inf, 0
    for _ in range(1000):
        p = random_valid_params(rng)
        negative_c2 += p.c2 < 0
        worst = min(worst, dg.dissipation(random_state(p, 32, rng), p))
    ok = worst >= 0.0 and negative_c2 > 0
    report(8, "dissipation positivity", ok,
           f"min D={worst:.3e} over 1000 states ({negative_c2} with c2<0)")


DESK = ModelParams(c1=0.4, c2=0.4, P_inf=1.0)
DESK_FORCING = ForcingSpec("exp_decay", 1e-4, 1.0, "exp_decay", 1e-4, 1.0)


def test_c09_exponential_stabilization(report):
    T = 2.2
    cfg = dy.SimConfig(params=DESK, forcing=DESK_FORCING, N=200, t_end=T, dt_safety=0.5,
                       snapshot_every=T / 100,
                       initial_data=dy.InitialData(kind="perturbed_stationary", amp=1e-3))
    t0 = time.perf_counter()
    traj = dy.simulate(cfg)
    wall = time.perf_counter() - t0
    t, E = traj.times, traj.series("E")
    I, B = traj.series("I_sup"), traj.series("B")
    fit = dg.decay_rate_fit(t, E, (0.5 * T, T))
    drop = float(E.max() / E[-1])
    ok = (fit.rate > 0 and fit.r_squared >= 0.95 and bool(np.all(I <= 2 * I[0]))
          and B[-1] < B[0] and drop >= 100 and wall < 120)
    report(9, "exponential stabilization", ok,
           f"rate={fit.rate:.3f} r2={fit.r_squared:.4f} E drop={drop:.0f}x "
           f"max I/I0={I.max() / I[0]:.2f} B {B[0]:.1e}->{B[-1]:.1e} wall={wall:.0f}s")


def test_c10_continuous_dependence(report):
    p, N = BENCH, 100
    cfg = dy.SimConfig(params=p, N=N, t_end=1.0, snapshot_every=0.02,
                       initial_data=dy.InitialData(kind="perturbed_stationary", amp=1e-3))
    base = dy.init_state(cfg)
    x = base.x

    def twin(eps):
        rho = base.rho * (1 + eps * np.cos(2 * np.pi * x))
        return dy.state_from_cells(p, rho, 0.1 * eps * np.sin(np.pi * x))

    ref = dy.simulate(cfg, diagnostics=False)
    curves = []
    for eps in (1e-3, 5e-4):
        other = dy.simulate(cfg, state=twin(eps), diagnostics=False)
        curves.append(np.array([dg.continuous_dependence_metric(a, b, p.n)
                                for a, b in zip(ref.states, other.states)]))
    t = ref.times
    d0_ratio = curves[1][0] / curves[0][0]
    r1, r2 = curves[0] / curves[0][0], curves[1] / curves[1][0]
    agree = float(np.max(np.abs(r1 - r2) / r1))
    C = dg.gronwall_constant(t, curves[0])
    bound = float(np.max(r2 / np.exp(C * t)))
    ok = abs(d0_ratio - 0.25) < 0.01 and agree <= 0.2 and bound <= 1.0 + 0.2
    report(10, "continuous dependence", ok,
           f"d0 ratio={d0_ratio:.4f} curve mismatch={agree:.1e} C={C:.3g} "
           f"max d2/(d2(0)e^Ct)={bound:.3f}")


def test_c11_self_convergence(report):
    cfg = dy.SimConfig(params=BENCH, N=100, t_end=0.05,
                       initial_data=dy.InitialData(kind="perturbed_stationary", amp=1e-2))
    res = dg.convergence_study(cfg, (100, 200, 400))
    orders = {k: v[0] for k, v in res.orders.items()}
    pair = {k: v[0] for k, v in res.pairwise_orders.items()}
    ok = all(o is not None and o >= 1.0 for o in orders.values())
    report(11, "self-convergence", ok,
           " ".join(f"{k}={orders[k]:.2f}" for k in orders)
           + " (pairwise " + " ".join(f"{k}={pair[k]:.2f}" for k in pair) + ")")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
