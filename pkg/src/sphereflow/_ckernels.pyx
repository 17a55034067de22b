# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; same API as ``_pykernels``."""

import numpy as np

from libc.math cimport exp, log, pow, sin, sqrt, cbrt, fmin, M_PI

cdef enum:
    OK = 0
    POSITIVITY_FAILURE = 1
    STEP_BUDGET = 2


cdef inline double ipow(double x, int k) nogil:
    cdef double out = 1.0
    cdef int i
    if k < 0:
        for i in range(-k):
            out *= x
        return 1.0 / out
    for i in range(k):
        out *= x
    return out


cdef struct Pars:
    int n
    int theta_int  # theta as an integer power, or -1
    double gamma, A, theta, c1, c2, G, P_inf, M
    double p_amp, p_rate, f_amp, f_rate
    int f_shape


cdef Pars unpack(double[::1] pars):
    cdef Pars p
    p.n = <int> pars[0]
    p.gamma = pars[1]
    p.A = pars[2]
    p.theta = pars[3]
    p.c1 = pars[4]
    p.c2 = pars[5]
    p.G = pars[6]
    p.P_inf = pars[7]
    p.M = pars[8]
    p.p_amp = pars[9]
    p.p_rate = pars[10]
    p.f_amp = pars[11]
    p.f_rate = pars[12]
    p.f_shape = <int> pars[13]
    p.theta_int = -1
    if p.theta == <int> p.theta and 0 <= p.theta <= 4:
        p.theta_int = <int> p.theta
    return p


cdef inline double rho_pow_theta(Pars* p, double rho, double lr) nogil:
    if p.theta_int >= 0:
        return ipow(rho, p.theta_int)
    return exp(p.theta * lr)


cdef inline double nth_root(double y, int n) nogil:
    if n == 3:
        return cbrt(y)
    if n == 2:
        return sqrt(y)
    return pow(y, 1.0 / n)


def cauchy_march(int n, double gamma, double A, double G, double sigma,
                 double M, int N, double x0_frac):
    cdef double h = M / N
    P_arr = np.full(N + 1, np.nan)
    V_arr = np.full(N + 1, np.nan)
    cdef double[::1] P = P_arr
    cdef double[::1] V = V_arr
    P[0] = A * pow(sigma, gamma)
    V[0] = 0.0
    cdef double inv_gamma = 1.0 / gamma
    cdef double grav = (2.0 - 2.0 * n) / n
    cdef double x0 = x0_frac * h
    cdef double p = P[0] - 0.5 * G * pow(n, (2.0 - n) / n) * pow(sigma, (2.0 * n - 2.0) / n) * pow(x0, 2.0 / n)
    cdef double v = x0 / sigma
    if p <= 0:
        return P_arr, V_arr, 0
    cdef double z = pow(x0, 1.0 / n)
    cdef double dz_cap = fmin(n * pow(M, 1.0 / n) / N, pow(M, 1.0 / n) / 200.0)
    cdef double z_end, dz, k1p, k1v, k2p, k2v, k3p, k3v, k4p, k4v
    cdef double p2, v2, p3, v3, p4, v4, zh
    cdef bint last
    cdef int j
    for j in range(N):
        z_end = pow((j + 1) * h, 1.0 / n)
        while z < z_end:
            dz = fmin(dz_cap, 0.25 * z)
            last = z + dz >= z_end * (1.0 - 1e-14)
            if last:
                dz = z_end - z
            k1p = -G * n * ipow(z, 2 * n - 1) * pow(n * v, grav)
            k1v = n * ipow(z, n - 1) / pow(p / A, inv_gamma)
            p2 = p + 0.5 * dz * k1p
            v2 = v + 0.5 * dz * k1v
            if p2 <= 0 or v2 <= 0:
                return P_arr, V_arr, j + 1
            zh = z + 0.5 * dz
            k2p = -G * n * ipow(zh, 2 * n - 1) * pow(n * v2, grav)
            k2v = n * ipow(zh, n - 1) / pow(p2 / A, inv_gamma)
            p3 = p + 0.5 * dz * k2p
            v3 = v + 0.5 * dz * k2v
            if p3 <= 0 or v3 <= 0:
                return P_arr, V_arr, j + 1
            k3p = -G * n * ipow(zh, 2 * n - 1) * pow(n * v3, grav)
            k3v = n * ipow(zh, n - 1) / pow(p3 / A, inv_gamma)
            p4 = p + dz * k3p
            v4 = v + dz * k3v
            if p4 <= 0 or v4 <= 0:
                return P_arr, V_arr, j + 1
            k4p = -G * n * ipow(z + dz, 2 * n - 1) * pow(n * v4, grav)
            k4v = n * ipow(z + dz, n - 1) / pow(p4 / A, inv_gamma)
            p = p + dz / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
            v = v + dz / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            if last:
                z = z_end
            else:
                z = z + dz
            if p <= 0:
                return P_arr, V_arr, j + 1
        P[j + 1] = p
        V[j + 1] = v
    return P_arr, V_arr, -1


cdef double c_closure(Pars* p, double h, double t, double[::1] rho,
                      double[::1] u, double[::1] r) nogil:
    cdef int N = rho.shape[0] - 1
    cdef double rn = rho[N]
    cdef double rt = rho_pow_theta(p, rn, log(rn))
    cdef double P_N = p.A * pow(rn, p.gamma)
    cdef double mu = p.c1 * rt
    cdef double k = (2 * p.c1 + p.c2) * rt * rn
    cdef double P_gamma = p.P_inf + p.p_amp * exp(-p.p_rate * t)
    cdef double rb = r[N + 1]
    cdef double a = -k * ipow(rb, p.n - 1) / h + 2 * (p.n - 1) * mu / rb
    return (P_gamma - P_N - k * ipow(r[N], p.n - 1) * u[N] / h) / a


def closure_velocity(double[::1] pars, double h, double t, double[::1] rho,
                     double[::1] u, double[::1] r):
    cdef Pars p = unpack(pars)
    return c_closure(&p, h, t, rho, u, r)


cdef double c_rhs(Pars* p, double h, double t, double[::1] rho, double[::1] u,
                  double[::1] r, double[::1] drho, double[::1] du,
                  double[::1] dr) nogil:
    cdef int N = rho.shape[0] - 1
    cdef int n = p.n
    cdef int i
    cdef double ub = c_closure(p, h, t, rho, u, r)
    cdef double kk = 2 * p.c1 + p.c2
    cdef double env = 0.0
    if p.f_amp != 0.0:
        env = p.f_amp * exp(-p.f_rate * t)
    cdef double lr, rt, P_i, mu_i, mu_prev = 0.0, sig_i, sig_prev = 0.0
    cdef double w_i, w_next, dw, x, rj, f, shape
    cdef double inv_h = 1.0 / h
    cdef double rn1_i = 0.0, rn1_next
    w_i = 0.0
    for i in range(N + 1):
        lr = log(rho[i])
        rt = rho_pow_theta(p, rho[i], lr)
        P_i = p.A * exp(p.gamma * lr)
        mu_i = p.c1 * rt
        rn1_next = ipow(r[i + 1], n - 1)
        if i < N:
            w_next = rn1_next * u[i + 1]
        else:
            w_next = rn1_next * ub
        dw = (w_next - w_i) * inv_h
        drho[i] = -rho[i] * rho[i] * dw
        sig_i = kk * rt * rho[i] * dw - P_i
        if i >= 1:
            # node i sits between cells i-1 and i
            rj = r[i]
            x = i * h
            f = p.G * x / rn1_i
            if env != 0.0:
                if p.f_shape == 0:
                    shape = sin(M_PI * x / p.M)
                    shape = shape * shape
                else:
                    shape = 1.0
                f = f + env * shape * fmin(1.0, rj)
            du[i] = (rn1_i * (sig_i - sig_prev)
                     - 2 * (n - 1) * (rn1_i / rj) * u[i] * (mu_i - mu_prev)) * inv_h - f
            dr[i] = u[i]
        sig_prev = sig_i
        mu_prev = mu_i
        w_i = w_next
        rn1_i = rn1_next
    du[0] = 0.0
    du[N + 1] = 0.0
    dr[0] = 0.0
    dr[N + 1] = ub
    return ub


def scheme_rhs(double[::1] pars, double h, double t, double[::1] rho,
               double[::1] u, double[::1] r, double[::1] drho,
               double[::1] du, double[::1] dr):
    cdef Pars p = unpack(pars)
    return c_rhs(&p, h, t, rho, u, r, drho, du, dr)


cdef void c_power(Pars* p, double h, double t, double[::1] rho, double[::1] u,
                  double[::1] r, double ub, double* diss, double* work) noexcept nogil:
    """Sum-of-squares dissipation and the power of the perturbations."""
    cdef int N = rho.shape[0] - 1
    cdef int n = p.n
    cdef int i
    cdef double inv_h = 1.0 / h
    cdef double a1 = 2 * p.c1 / n + p.c2
    cdef double a2 = 2.0 * (n - 1) / n * p.c1
    cdef double D = 0.0, W = 0.0, k, u0, u1, w0, w1, dw, du, rcn, rc, uc, shear
    cdef double env = 0.0, x, shape
    cdef double rn1_0 = ipow(r[0], n - 1), rn1_1, rn_0 = rn1_0 * r[0], rn_1
    for i in range(N + 1):
        if p.theta_int >= 0:
            k = ipow(rho[i], p.theta_int) * rho[i]
        else:
            k = exp(p.theta * log(rho[i])) * rho[i]
        u0 = u[i] if i > 0 else 0.0
        u1 = u[i + 1] if i < N else ub
        rn1_1 = ipow(r[i + 1], n - 1)
        rn_1 = rn1_1 * r[i + 1]
        w0 = rn1_0 * u0
        w1 = rn1_1 * u1
        dw = (w1 - w0) * inv_h
        du = (u1 - u0) * inv_h
        rcn = 0.5 * (rn_0 + rn_1)
        rc = nth_root(rcn, n)
        uc = 0.5 * (u0 + u1)
        shear = rcn / rc * du - uc / (rc * rho[i])
        D += a1 * k * dw * dw + a2 * k * shear * shear
        rn1_0 = rn1_1
        rn_0 = rn_1
    W = -p.p_amp * exp(-p.p_rate * t) * ipow(r[N + 1], n - 1) * ub
    if p.f_amp != 0.0:
        env = p.f_amp * exp(-p.f_rate * t)
        for i in range(1, N + 1):
            x = i * h
            if p.f_shape == 0:
                shape = sin(M_PI * x / p.M)
                shape = shape * shape
            else:
                shape = 1.0
            W -= h * env * shape * fmin(1.0, r[i]) * u[i]
    diss[0] = h * D
    work[0] = W


def power(double[::1] pars, double h, double t, double[::1] rho, double[::1] u,
          double[::1] r, double ub):
    cdef Pars p = unpack(pars)
    cdef double D, W
    c_power(&p, h, t, rho, u, r, ub, &D, &W)
    return D, W


cdef double c_stable_dt(Pars* p, double h, double[::1] rho, double[::1] r,
                        double safety) nogil:
    cdef int N = rho.shape[0] - 1
    cdef int i, n = p.n
    cdef double worst = 0.0, lr, ro, val
    for i in range(N + 1):
        lr = log(rho[i])
        ro = r[i + 1]
        val = ((2 * p.c1 + p.c2) * rho_pow_theta(p, rho[i], lr) * rho[i] * ipow(ro, 2 * n - 2)
               + h * sqrt(p.gamma * p.A * exp((p.gamma - 1.0) * lr)) * rho[i] * ipow(ro, n - 1))
        if val > worst:
            worst = val
    return safety * h * h / worst


def stable_dt(double[::1] pars, double h, double[::1] rho, double[::1] r, double safety):
    cdef Pars p = unpack(pars)
    return c_stable_dt(&p, h, rho, r, safety)


cdef bint admissible(double[::1] rho, double[::1] r) nogil:
    cdef int i
    for i in range(rho.shape[0]):
        if not rho[i] > 0:
            return False
    for i in range(r.shape[0] - 1):
        if not r[i + 1] > r[i]:
            return False
    return True


def advance(double[::1] pars, double h, double[::1] rho, double[::1] u,
            double[::1] r, double t, double t_target, double dt_safety,
            int max_halvings, long max_steps, double[::1] acc=None):
    cdef Pars p = unpack(pars)
    cdef int N = rho.shape[0] - 1
    cdef Py_ssize_t nr_ = N + 1, nu_ = N + 2
    kr_np = np.empty((4, nr_))
    ku_np = np.empty((4, nu_))
    kx_np = np.empty((4, nu_))
    sr_np = np.empty(nr_)
    su_np = np.empty(nu_)
    sx_np = np.empty(nu_)
    cdef double[:, ::1] kr = kr_np
    cdef double[:, ::1] ku = ku_np
    cdef double[:, ::1] kx = kx_np
    cdef double[::1] sr = sr_np
    cdef double[::1] su = su_np
    cdef double[::1] sx = sx_np
    cdef long steps = 0
    cdef int halvings = 0, attempt, s, i
    cdef double span = abs(t_target)
    if span < 1.0:
        span = 1.0
    cdef double dt, c, w
    cdef bint ok
    cdef double[4] cs = [0.0, 0.5, 0.5, 1.0]
    cdef double[4] Dk
    cdef double[4] Wk
    cdef double ubs
    cdef bint accumulate = acc is not None
    with nogil:
        while t_target - t > 1e-14 * span:
            if steps >= max_steps:
                u[N + 1] = c_closure(&p, h, t, rho, u, r)
                with gil:
                    return t, steps, STEP_BUDGET, halvings
            dt = fmin(c_stable_dt(&p, h, rho, r, dt_safety), t_target - t)
            ok = False
            for attempt in range(max_halvings + 1):
                ok = True
                for s in range(4):
                    c = cs[s]
                    if s == 0:
                        ubs = c_rhs(&p, h, t, rho, u, r, kr[0], ku[0], kx[0])
                        if accumulate:
                            c_power(&p, h, t, rho, u, r, ubs, &Dk[0], &Wk[0])
                        continue
                    for i in range(N + 1):
                        sr[i] = rho[i] + c * dt * kr[s - 1, i]
                    for i in range(N + 2):
                        su[i] = u[i] + c * dt * ku[s - 1, i]
                        sx[i] = r[i] + c * dt * kx[s - 1, i]
                    if not admissible(sr, sx):
                        ok = False
                        break
                    ubs = c_rhs(&p, h, t + c * dt, sr, su, sx, kr[s], ku[s], kx[s])
                    if accumulate:
                        c_power(&p, h, t + c * dt, sr, su, sx, ubs, &Dk[s], &Wk[s])
                if ok:
                    w = dt / 6.0
                    for i in range(N + 1):
                        sr[i] = rho[i] + w * (kr[0, i] + 2 * kr[1, i] + 2 * kr[2, i] + kr[3, i])
                    for i in range(N + 2):
                        su[i] = u[i] + w * (ku[0, i] + 2 * ku[1, i] + 2 * ku[2, i] + ku[3, i])
                        sx[i] = r[i] + w * (kx[0, i] + 2 * kx[1, i] + 2 * kx[2, i] + kx[3, i])
                    su[0] = 0.0
                    if admissible(sr, sx):
                        break
                    ok = False
                dt = dt * 0.5
                halvings += 1
            if not ok:
                u[N + 1] = c_closure(&p, h, t, rho, u, r)
                with gil:
                    return t, steps, POSITIVITY_FAILURE, halvings
            if accumulate:
                acc[0] += dt / 6.0 * (Dk[0] + 2 * Dk[1] + 2 * Dk[2] + Dk[3])
                acc[1] += dt / 6.0 * (Wk[0] + 2 * Wk[1] + 2 * Wk[2] + Wk[3])
            for i in range(N + 1):
                rho[i] = sr[i]
            for i in range(N + 2):
                u[i] = su[i]
                r[i] = sx[i]
            if t_target - (t + dt) <= 1e-14 * span:
                t = t_target
            else:
                t = t + dt
            steps += 1
        u[N + 1] = c_closure(&p, h, t, rho, u, r)
    return t, steps, OK, halvings
