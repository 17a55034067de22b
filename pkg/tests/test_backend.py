import numpy as np
import pytest

from sphereflow import BACKEND
from sphereflow import dynamics as dy
from sphereflow._backend import get_kernels
from sphereflow.model import ForcingSpec, ModelParams
from sphereflow.verify import random_state, random_valid_params

try:
    compiled = get_kernels("compiled")
except ImportError:
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")
python = get_kernels("python")
FORCING = ForcingSpec("exp_decay", 0.2, 1.0, "exp_decay", 0.1, 2.0)


def _case(seed, theta=None):
    rng = np.random.default_rng(seed)
    p = random_valid_params(rng)
    if theta is not None:
        p = ModelParams(**{**p.as_dict(), "theta": theta})
    s = random_state(p, 48, rng, rho_amp=0.2, u_amp=0.3)
    return p, s, dy.pack_params(p, FORCING)


def test_backend_names():
    assert BACKEND in ("compiled", "python")
    with pytest.raises(ValueError):
        get_kernels("fortran")


@needs_ext
@pytest.mark.parametrize("seed,theta", [(0, None), (1, None), (2, 1.0), (3, 0.0), (4, 2.0)])
def test_rhs_parity(seed, theta):
    p, s, pars = _case(seed, theta)
    outs = []
    for k in (python, compiled):
        N = s.N
        drho, du, dr = np.empty(N + 1), np.empty(N + 2), np.empty(N + 2)
        ub = k.scheme_rhs(pars, s.h, 0.3, s.rho, s.u.copy(), s.r, drho, du, dr)
        outs.append((ub, drho, du, dr))
    for a, b in zip(*outs):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@needs_ext
def test_advance_parity():
    p, s, pars = _case(5)
    res = []
    for k in (python, compiled):
        rho, u, r = s.rho.copy(), s.u.copy(), s.r.copy()
        acc = np.zeros(2)
        t, steps, status, halvings = k.advance(pars, s.h, rho, u, r, 0.0, 1e-3, 0.25, 20, 10**6, acc)
        res.append((t, steps, status, rho, u, r, acc))
    (t1, n1, s1, *f1), (t2, n2, s2, *f2) = res
    assert (n1, s1) == (n2, s2) and t1 == pytest.approx(t2, rel=1e-14)
    for a, b in zip(f1, f2):
        assert np.allclose(a, b, rtol=1e-10, atol=1e-13)


@needs_ext
def test_cauchy_and_power_parity():
    a = python.cauchy_march(3, 5 / 3, 1.0, 1.0, 0.4, 1.0, 300, 1e-4)
    b = compiled.cauchy_march(3, 5 / 3, 1.0, 1.0, 0.4, 1.0, 300, 1e-4)
    assert np.allclose(a[0], b[0], rtol=1e-12) and np.allclose(a[1], b[1], rtol=1e-12)
    assert a[2] == b[2]
    p, s, pars = _case(6)
    ub = python.closure_velocity(pars, s.h, 0.1, s.rho, s.u, s.r)
    assert ub == pytest.approx(compiled.closure_velocity(pars, s.h, 0.1, s.rho, s.u, s.r), rel=1e-12)
    pa = python.power(pars, s.h, 0.1, s.rho, s.u, s.r, ub)
    pb = compiled.power(pars, s.h, 0.1, s.rho, s.u, s.r, ub)
    assert np.allclose(pa, pb, rtol=1e-12)
    assert python.stable_dt(pars, s.h, s.rho, s.r, 0.5) == pytest.approx(
        compiled.stable_dt(pars, s.h, s.rho, s.r, 0.5), rel=1e-14)
