import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sphereflow.model import (ForcingSpec, ModelParams, NO_FORCING, body_force, discriminant,
                              eulerian_samples, lagrangian_coordinates, pressure, validate_params,
                              viscosity)
from sphereflow import dynamics as dy
from sphereflow.stationary import shoot


def test_default_params_accepted():
    rep = validate_params(ModelParams())
    assert rep.ok
    assert rep.a1_branch == "supercritical"
    # oracle: direct evaluation with alpha = -3/2, c1 = c2 = 1
    a = -1.5
    lin = 2 * a + (4 + a)
    quad = 4 * 3 * (4 + 2 * (2 + a))
    assert rep.quantities["discriminant"] == pytest.approx(lin ** 2 - quad)
    assert rep.quantities["discriminant"] < 0


def test_bulk_condition_rejected():
    rep = validate_params(ModelParams(c1=1, c2=-1))
    assert not rep.ok
    names = [v.condition for v in rep.violations]
    assert "2c1+nc2>0" in names
    v = next(v for v in rep.violations if v.condition == "2c1+nc2>0")
    assert v.value == -1


def test_critical_gamma_branch():
    p = ModelParams(gamma=4.0 / 3.0, G=1, M=1, A=1)
    rep = validate_params(p)
    assert rep.ok and rep.a1_branch == "critical"
    assert rep.quantities["A1_mass_term"] == pytest.approx(3 ** (-1 / 3), rel=1e-12)
    assert rep.quantities["A1_mass_term"] == pytest.approx(0.693, abs=1e-3)


def test_critical_gamma_too_heavy_rejected():
    rep = validate_params(ModelParams(gamma=4.0 / 3.0, G=1, M=30, A=1))
    assert any(v.condition == "A1" for v in rep.violations)


def test_isothermal_rejected():
    rep = validate_params(ModelParams(n=2, gamma=1.0))
    assert any(v.condition == "gamma>1" for v in rep.violations)


def test_report_lists_every_failure():
    rep = validate_params(ModelParams(gamma=0.5, A=-1, P_inf=0, M=0, c1=0))
    names = {v.condition for v in rep.violations}
    assert {"gamma>1", "A>0", "P_inf>0", "M>0", "c1>0"} <= names
    assert "reject" in rep.summary()


def test_non_integer_dimension_rejected():
    rep = validate_params(ModelParams(n=2.5))
    assert [v.condition for v in rep.violations] == ["n>=2 integer"]


def test_subcritical_branch_reported_with_note():
    # weak gravity so the invariant-set condition holds
    rep = validate_params(ModelParams(gamma=1.2, G=0.01))
    assert rep.a1_branch == "subcritical"
    assert rep.ok
    assert any("uniqueness" in note for note in rep.notes)


def test_zero_gravity_note():
    rep = validate_params(ModelParams(G=0))
    assert rep.ok and rep.a1_branch == "G=0" and rep.notes


def test_discriminant_band_edges():
    # the admissible c2/c1 band for n=3 is roughly (-0.574, 17.9)
    assert discriminant(3, 1.0, -0.5) < 0
    assert discriminant(3, 1.0, -0.6) > 0
    assert discriminant(3, 1.0, 17.0) < 0
    assert discriminant(3, 1.0, 19.0) > 0


@pytest.mark.parametrize("A,gamma,rho,expected", [(1, 2, 2, 4), (2, 5 / 3, 8, 64), (3.5, 1.4, 1, 3.5)])
def test_pressure_values(A, gamma, rho, expected):
    assert pressure(ModelParams(A=A, gamma=gamma), rho) == pytest.approx(expected, rel=1e-14)


def test_pressure_domain_error():
    with pytest.raises(ValueError):
        pressure(ModelParams(), 0.0)
    with pytest.raises(ValueError):
        viscosity(ModelParams(), np.array([1.0, -1.0]))


def test_viscosity_values():
    assert viscosity(ModelParams(theta=0, c1=2, c2=-0.5), 7.3) == (2, -0.5)
    mu, lam = viscosity(ModelParams(c1=3, theta=0.5), 4.0)
    assert mu == pytest.approx(6.0)
    assert viscosity(ModelParams(c1=1.7, c2=0.3, theta=2.2), 1.0) == (1.7, 0.3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 50), st.floats(0.01, 50), st.floats(1.05, 3), st.floats(0.1, 2))
def test_constitutive_monotone(r1, r2, gamma, theta):
    p = ModelParams(gamma=gamma, theta=theta)
    lo, hi = sorted((r1, r2))
    if hi - lo < 1e-9 * hi:
        return
    assert pressure(p, lo) < pressure(p, hi)
    assert viscosity(p, lo)[0] < viscosity(p, hi)[0]


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.floats(0.05, 5), st.floats(-0.9, 20))
def test_dissipation_coefficients_positive(n, c1, ratio):
    p = ModelParams(n=n, c1=c1, c2=ratio * c1)
    if validate_params(p).ok:
        assert 2 * p.c1 / n + p.c2 > 0
        assert 2 * (n - 1) * p.c1 / n > 0


def test_validate_is_pure():
    p = ModelParams(c1=1, c2=-1)
    assert validate_params(p) == validate_params(p)


def test_body_force():
    p = ModelParams(G=1, n=3)
    assert body_force(p, NO_FORCING, 8.0, 2.0, 0.0) == pytest.approx(2.0)
    q = ModelParams(G=0)
    assert body_force(q, NO_FORCING, np.linspace(0, 1, 5), np.linspace(0.1, 2, 5), 3.0) == pytest.approx(0)
    with pytest.raises(ValueError):
        body_force(p, NO_FORCING, 0.5, 0.0, 0.0)


def test_body_force_decays_to_gravity():
    p = ModelParams(G=1, n=3)
    fs = ForcingSpec(force_kind="exp_decay", force_amp=0.5, force_rate=1.0)
    x, r = 0.5, 0.8
    grav = 0.5 / 0.8 ** 2
    vals = [body_force(p, fs, x, r, t) - grav for t in (0, 1, 2, 40)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[3] == pytest.approx(0, abs=1e-16)
    assert vals[1] / vals[0] == pytest.approx(math.exp(-1))


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(0, 3), st.floats(0, 5), st.floats(0, 1), st.floats(0.01, 4))
def test_forcing_envelope(amp, rate, t, x, r):
    fs = ForcingSpec("exp_decay", amp, rate, "exp_decay", amp, rate)
    env = abs(amp) * math.exp(-rate * t)
    assert abs(float(fs.delta_P(t))) <= env * (1 + 1e-12)
    assert abs(float(fs.delta_f(x, r, t))) <= env * (1 + 1e-12)


def test_forcing_none_is_zero():
    fs = ForcingSpec(pressure_amp=3.0, force_amp=2.0)  # kinds default to none
    assert float(fs.delta_P(0.3)) == 0.0
    assert np.all(fs.delta_f(np.linspace(0, 1, 4), 1.0, 0.0) == 0.0)


def test_forcing_rejects_bad_kind():
    with pytest.raises(ValueError):
        ForcingSpec(pressure_kind="sine")


def test_eulerian_uniform_boundary_radius():
    p = ModelParams(n=3, M=1, G=0)
    N = 64
    s = dy.state_from_cells(p, np.full(N + 1, 2.0), np.zeros(N + 1))
    e = eulerian_samples(s)
    # r_{N+1}^n = h + n (N+1) h / 2 = n M / 2 + h (1 + n/2)
    h = 1 / N
    assert e.boundary_radius == pytest.approx((1.5 + h * 2.5) ** (1 / 3), rel=1e-14)
    assert np.all(np.diff(e.r) > 0)


def test_eulerian_profile_density_decreasing():
    prof = shoot(ModelParams(), 400)
    e = eulerian_samples(prof)
    assert e.boundary_radius == prof.l_inf
    drho_dr = np.diff(e.rho) / np.diff(e.r)
    assert np.all(drho_dr < 0)


def test_eulerian_rejects_corrupted_state():
    p = ModelParams(G=0)
    s = dy.state_from_cells(p, np.full(17, 1.0), np.zeros(17))
    s.r[5] = s.r[4]
    with pytest.raises(ValueError):
        eulerian_samples(s)


def test_lagrangian_round_trip():
    # fine profile, Eulerian samples, back to mass coordinates
    prof = shoot(ModelParams(), 4000)
    e = eulerian_samples(prof)
    x = lagrangian_coordinates(e.r, e.rho, 3)
    assert np.max(np.abs(x - prof.x)) < 1e-5
    coarse = shoot(ModelParams(), 400)
    ec = eulerian_samples(coarse)
    xc = lagrangian_coordinates(ec.r, ec.rho, 3)
    assert np.max(np.abs(xc - coarse.x)) < 1e-3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_radii_bounded_by_density_extrema(seed):
    rng = np.random.default_rng(seed)
    p = ModelParams(G=0)
    N = 32
    rho = rng.uniform(0.2, 3.0, N + 1)
    s = dy.state_from_cells(p, rho, np.zeros(N + 1))
    e = eulerian_samples(s)
    x = s.x[1:]
    rn = e.r[1:] ** 3
    C = 3 * max(1 / rho.min(), rho.max()) * 3
    assert np.all(rn >= x / C) and np.all(rn <= C * x)
