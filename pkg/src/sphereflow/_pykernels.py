"""Pure-Python/numpy versions of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable.  The
signatures and results match the compiled module; see ``_backend``.

``pars`` is the packed float vector
``[n, gamma, A, theta, c1, c2, G, P_inf, M, p_amp, p_rate, f_amp, f_rate, f_shape]``.
"""

import math

import numpy as np

OK, POSITIVITY_FAILURE, STEP_BUDGET = 0, 1, 2


def cauchy_march(n, gamma, A, G, sigma, M, N, x0_frac):
    """Integrate the hydrostatic Cauchy problem from the centre outwards.

    Unknowns are the pressure ``P = A rho**gamma`` and the specific volume
    integral ``V``.  The march runs in ``z = x**(1/n)``, in which both are
    smooth at the centre; the first ``x0 = x0_frac * M / N`` is covered by the
    leading-order series.  Returns node values at ``x_j = j M / N`` and the
    index of the first node that could not be reached (``-1`` on success).
    """
    n = int(n)
    h = M / N
    P = np.full(N + 1, np.nan)
    V = np.full(N + 1, np.nan)
    P[0] = A * sigma ** gamma
    V[0] = 0.0
    inv_gamma = 1.0 / gamma
    grav = (2.0 - 2.0 * n) / n
    x0 = x0_frac * h
    p = P[0] - 0.5 * G * n ** ((2.0 - n) / n) * sigma ** ((2.0 * n - 2.0) / n) * x0 ** (2.0 / n)
    v = x0 / sigma
    if p <= 0:
        return P, V, 0
    z = x0 ** (1.0 / n)
    dz_cap = min(n * M ** (1.0 / n) / N, M ** (1.0 / n) / 200.0)

    def f(zz, pp, vv):
        dp = -G * n * zz ** (2 * n - 1) * (n * vv) ** grav
        dv = n * zz ** (n - 1) / (pp / A) ** inv_gamma
        return dp, dv

    for j in range(N):
        z_end = ((j + 1) * h) ** (1.0 / n)
        while z < z_end:
            dz = min(dz_cap, 0.25 * z)
            last = z + dz >= z_end * (1.0 - 1e-14)
            if last:
                dz = z_end - z
            k1p, k1v = f(z, p, v)
            p2 = p + 0.5 * dz * k1p
            v2 = v + 0.5 * dz * k1v
            if p2 <= 0 or v2 <= 0:
                return P, V, j + 1
            k2p, k2v = f(z + 0.5 * dz, p2, v2)
            p3 = p + 0.5 * dz * k2p
            v3 = v + 0.5 * dz * k2v
            if p3 <= 0 or v3 <= 0:
                return P, V, j + 1
            k3p, k3v = f(z + 0.5 * dz, p3, v3)
            p4 = p + dz * k3p
            v4 = v + dz * k3v
            if p4 <= 0 or v4 <= 0:
                return P, V, j + 1
            k4p, k4v = f(z + dz, p4, v4)
            p = p + dz / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
            v = v + dz / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            z = z_end if last else z + dz
            if p <= 0:
                return P, V, j + 1
        P[j + 1] = p
        V[j + 1] = v
    return P, V, -1


def _unpack(pars):
    n = int(pars[0])
    return (n, pars[1], pars[2], pars[3], pars[4], pars[5], pars[6], pars[7], pars[8],
            pars[9], pars[10], pars[11], pars[12], int(pars[13]))


def closure_velocity(pars, h, t, rho, u, r):
    n, gamma, A, theta, c1, c2, G, P_inf, M, p_amp, p_rate = _unpack(pars)[:11]
    N = rho.shape[0] - 1
    rn = rho[N]
    P_N = A * rn ** gamma
    mu = c1 * rn ** theta
    k = (2 * c1 + c2) * rn ** theta * rn
    P_gamma = P_inf + p_amp * math.exp(-p_rate * t)
    rb = r[N + 1]
    a = -k * rb ** (n - 1) / h + 2 * (n - 1) * mu / rb
    return (P_gamma - P_N - k * r[N] ** (n - 1) * u[N] / h) / a


def scheme_rhs(pars, h, t, rho, u, r, drho, du, dr):
    """Evaluate the semi-discrete scheme; returns the closure velocity u_{N+1}."""
    n, gamma, A, theta, c1, c2, G, P_inf, M, p_amp, p_rate, f_amp, f_rate, f_shape = _unpack(pars)
    N = rho.shape[0] - 1
    P = A * rho ** gamma
    rt = rho ** theta
    mu = c1 * rt
    k = (2 * c1 + c2) * rt * rho
    rn1 = r ** (n - 1)
    P_gamma = P_inf + p_amp * math.exp(-p_rate * t)
    rb = r[N + 1]
    a = -k[N] * rn1[N + 1] / h + 2 * (n - 1) * mu[N] / rb
    ub = (P_gamma - P[N] - k[N] * rn1[N] * u[N] / h) / a

    w = rn1 * u
    w[0] = 0.0
    w[N + 1] = rn1[N + 1] * ub
    dw = (w[1:] - w[:-1]) / h
    drho[:] = -rho * rho * dw
    sig = k * dw - P
    j = np.arange(1, N + 1)
    xj = j * h
    rj = r[1 : N + 1]
    f = G * xj / rn1[1 : N + 1]
    if f_amp != 0.0:
        env = f_amp * math.exp(-f_rate * t)
        shape = np.sin(math.pi * xj / M) ** 2 if f_shape == 0 else 1.0
        f = f + env * shape * np.minimum(1.0, rj)
    du[0] = 0.0
    du[1 : N + 1] = (
        rn1[1 : N + 1] * (sig[1:] - sig[:-1]) / h
        - 2 * (n - 1) * rj ** (n - 2) * u[1 : N + 1] * (mu[1:] - mu[:-1]) / h
        - f
    )
    du[N + 1] = 0.0
    dr[0] = 0.0
    dr[1 : N + 1] = u[1 : N + 1]
    dr[N + 1] = ub
    return ub


def power(pars, h, t, rho, u, r, ub):
    """Sum-of-squares dissipation and the power of the perturbations."""
    n, gamma, A, theta, c1, c2, G, P_inf, M, p_amp, p_rate, f_amp, f_rate, f_shape = _unpack(pars)
    N = rho.shape[0] - 1
    uu = np.array(u, dtype=float)
    uu[0] = 0.0
    uu[N + 1] = ub
    k = rho ** theta * rho
    w = r ** (n - 1) * uu
    dw = np.diff(w) / h
    du = np.diff(uu) / h
    rcn = 0.5 * (r[1:] ** n + r[:-1] ** n)
    rc = rcn ** (1.0 / n)
    uc = 0.5 * (uu[1:] + uu[:-1])
    shear = rcn / rc * du - uc / (rc * rho)
    D = h * np.sum((2 * c1 / n + c2) * k * dw * dw + 2.0 * (n - 1) / n * c1 * k * shear * shear)
    W = -p_amp * math.exp(-p_rate * t) * r[N + 1] ** (n - 1) * ub
    if f_amp != 0.0:
        xj = h * np.arange(1, N + 1)
        shape = np.sin(math.pi * xj / M) ** 2 if f_shape == 0 else 1.0
        env = f_amp * math.exp(-f_rate * t)
        W -= h * np.sum(env * shape * np.minimum(1.0, r[1 : N + 1]) * uu[1 : N + 1])
    return float(D), float(W)


def stable_dt(pars, h, rho, r, safety):
    n, gamma, A, theta, c1, c2 = _unpack(pars)[:6]
    ro = r[1:]
    visc = (2 * c1 + c2) * rho ** theta * rho * ro ** (2 * n - 2)
    sound = np.sqrt(gamma * A * rho ** (gamma - 1)) * rho
    return safety * h * h / np.max(visc + h * sound * ro ** (n - 1))


def _admissible(rho, r):
    return bool(np.all(rho > 0) and np.all(r[1:] > r[:-1]))


def advance(pars, h, rho, u, r, t, t_target, dt_safety, max_halvings, max_steps, acc=None):
    """Advance in place with classical RK4 until ``t_target``.

    Returns ``(t, steps, status, halvings)``.  On a positivity failure the
    arrays hold the last accepted state.  If ``acc`` is given, the time
    integrals of the dissipation and of the perturbation power are added to
    ``acc[0]`` and ``acc[1]`` with the same RK4 weights.
    """
    N = rho.shape[0] - 1
    shape = (N + 1, N + 2, N + 2)
    k_rho = [np.empty(shape[0]) for _ in range(4)]
    k_u = [np.empty(shape[1]) for _ in range(4)]
    k_r = [np.empty(shape[2]) for _ in range(4)]
    steps = 0
    halvings_total = 0
    span = max(abs(t_target), 1.0)
    while t_target - t > 1e-14 * span:
        if steps >= max_steps:
            u[N + 1] = closure_velocity(pars, h, t, rho, u, r)
            return t, steps, STEP_BUDGET, halvings_total
        dt = min(stable_dt(pars, h, rho, r, dt_safety), t_target - t)
        accepted = False
        for attempt in range(max_halvings + 1):
            res = _rk4_try(pars, h, t, dt, rho, u, r, k_rho, k_u, k_r, acc is not None)
            if res is not None:
                accepted = True
                break
            dt *= 0.5
            halvings_total += 1
        if not accepted:
            u[N + 1] = closure_velocity(pars, h, t, rho, u, r)
            return t, steps, POSITIVITY_FAILURE, halvings_total
        nrho, nu, nr, powers = res
        if acc is not None:
            acc[0] += dt / 6.0 * (powers[0][0] + 2 * powers[1][0] + 2 * powers[2][0] + powers[3][0])
            acc[1] += dt / 6.0 * (powers[0][1] + 2 * powers[1][1] + 2 * powers[2][1] + powers[3][1])
        rho[:] = nrho
        u[:] = nu
        r[:] = nr
        t = t_target if t_target - (t + dt) <= 1e-14 * span else t + dt
        steps += 1
    u[N + 1] = closure_velocity(pars, h, t, rho, u, r)
    return t, steps, OK, halvings_total


def _rk4_try(pars, h, t, dt, rho, u, r, k_rho, k_u, k_r, accumulate=False):
    stages = ((0.0, None), (0.5, 0), (0.5, 1), (1.0, 2))
    powers = []
    for s, (c, prev) in enumerate(stages):
        if prev is None:
            sr, su, sx = rho, u, r
        else:
            sr = rho + c * dt * k_rho[prev]
            su = u + c * dt * k_u[prev]
            sx = r + c * dt * k_r[prev]
            if not _admissible(sr, sx):
                return None
        ub = scheme_rhs(pars, h, t + c * dt, sr, su, sx, k_rho[s], k_u[s], k_r[s])
        if accumulate:
            powers.append(power(pars, h, t + c * dt, sr, su, sx, ub))
    w = dt / 6.0
    nrho = rho + w * (k_rho[0] + 2 * k_rho[1] + 2 * k_rho[2] + k_rho[3])
    nu = u + w * (k_u[0] + 2 * k_u[1] + 2 * k_u[2] + k_u[3])
    nr = r + w * (k_r[0] + 2 * k_r[1] + 2 * k_r[2] + k_r[3])
    nu[0] = 0.0
    if not _admissible(nrho, nr):
        return None
    return nrho, nu, nr, powers
