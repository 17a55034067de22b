"""Hydrostatic equilibrium in mass coordinates.

The stationary problem is ``(A rho**gamma)_x = -G x (n V)**((2-2n)/n)``,
``V_x = 1/rho``, ``V(0) = 0`` with end pressure ``A rho(M)**gamma = P_inf``.
It is solved by shooting on the central density (authoritative) and by the
monotone fixed-point map on the density (cross-check).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize
from scipy.interpolate import CubicSpline

from ._backend import kernels
from .model import ModelParams, ParameterError, validate_params

__all__ = [
    "StationaryProfile",
    "ShootingBracket",
    "CauchyResult",
    "StationarySolveError",
    "integrate_cauchy",
    "shooting_residual",
    "bracket",
    "shoot",
    "fixed_point_solve",
    "potential_energy_S",
    "stability_min_eigen",
    "verify_stationary_identity",
    "pressure_integral",
]

MIN_N = 16
X0_FRAC = 1e-4  # startup length for the Cauchy march, in units of h


class StationarySolveError(RuntimeError):
    """The stationary solver could not produce a profile."""


@dataclass(frozen=True, eq=False)
class StationaryProfile:
    params: ModelParams
    N: int
    sigma: float
    rho: np.ndarray
    V: np.ndarray
    r: np.ndarray
    l_inf: float
    residual: float
    method: str = "shoot"
    iterations: int = 0

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.params.M, self.N + 1)

    @property
    def h(self) -> float:
        return self.params.M / self.N


@dataclass(frozen=True)
class ShootingBracket:
    sigma_low: float
    sigma_high: float
    g_low: float
    g_high: float
    doublings: int = 0


class CauchyResult(NamedTuple):
    rho: np.ndarray
    V: np.ndarray
    reached_M: bool
    failure_x: float | None


def _check_accepted(p: ModelParams):
    report = validate_params(p)
    if not report.ok:
        raise ParameterError(report)
    return report


def integrate_cauchy(p: ModelParams, sigma: float, N: int) -> CauchyResult:
    """March the hydrostatic Cauchy problem from central density ``sigma``.

    Node values at ``x_j = j M / N``.  If the pressure would reach zero
    before ``x = M`` the remaining nodes are NaN and ``failure_x`` is the
    first node that could not be reached.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if N < MIN_N:
        raise ValueError(f"N must be at least {MIN_N}")
    P, V, fail = kernels.cauchy_march(int(p.n), float(p.gamma), float(p.A), float(p.G),
                                      float(sigma), float(p.M), int(N), X0_FRAC)
    P = np.asarray(P)
    V = np.asarray(V)
    with np.errstate(invalid="ignore"):
        rho = (P / p.A) ** (1.0 / p.gamma)
    if fail >= 0:
        return CauchyResult(rho, V, False, fail * p.M / N)
    return CauchyResult(rho, V, True, None)


def shooting_residual(p: ModelParams, sigma: float, N: int) -> float:
    """``g(sigma) = A rho(sigma, M)**gamma - P_inf``; ``-P_inf`` on early failure."""
    res = integrate_cauchy(p, sigma, N)
    if not res.reached_M:
        return -p.P_inf
    return p.A * res.rho[-1] ** p.gamma - p.P_inf


def bracket(p: ModelParams, N: int, max_doublings: int = 60) -> ShootingBracket:
    """Bracket the root of the monotone shooting map."""
    lo = p.rho_edge
    g_lo = shooting_residual(p, lo, N)
    if g_lo >= 0:
        return ShootingBracket(lo, lo, g_lo, g_lo, 0)
    hi = 2.0 * lo
    for k in range(max_doublings):
        g_hi = shooting_residual(p, hi, N)
        if g_hi >= 0:
            return ShootingBracket(lo, hi, g_lo, g_hi, k)
        lo, g_lo = hi, g_hi
        hi *= 2.0
    raise StationarySolveError(
        f"no sign change of the end pressure within {max_doublings} doublings "
        f"(sigma up to {hi:.3g})")


def _profile(p, N, sigma, rho, V, method, iterations=0):
    r = (p.n * V) ** (1.0 / p.n)
    residual = abs(p.A * rho[-1] ** p.gamma - p.P_inf)
    return StationaryProfile(p, int(N), float(sigma), rho, V, r, float(r[-1]),
                             float(residual), method, iterations)


def shoot(p: ModelParams, N: int = 2000, tol: float = 1e-10) -> StationaryProfile:
    """Solve the stationary problem by shooting on the central density.

    The bracket starts at the edge density and doubles; the root of the
    monotone end-pressure map is then polished with Brent's method.
    """
    _check_accepted(p)
    if not tol > 0:
        raise ValueError("tol must be positive")
    br = bracket(p, N)
    if br.g_low == 0.0 or br.sigma_low == br.sigma_high:
        sigma = br.sigma_low
        iterations = 0
    else:
        sigma, info = optimize.brentq(lambda s: shooting_residual(p, s, N),
                                      br.sigma_low, br.sigma_high,
                                      xtol=1e-15 * br.sigma_high, rtol=4 * np.finfo(float).eps,
                                      maxiter=200, full_output=True)
        iterations = info.iterations
    res = integrate_cauchy(p, sigma, N)
    if not res.reached_M:
        raise StationarySolveError("shooting root does not reach the boundary")
    prof = _profile(p, N, sigma, res.rho, res.V, "shoot", iterations)
    if prof.residual > tol:
        raise StationarySolveError(
            f"end-pressure residual {prof.residual:.3e} above tol {tol:.1e}")
    return prof


# --- fixed point --------------------------------------------------------

_GL_T, _GL_W = np.polynomial.legendre.leggauss(8)


def _volume(f, s, n):
    """``V(x) = int_0^x 1/f`` computed in ``s = x**(2/n)``.

    With ``g = 1/f`` interpolated by a cubic spline in ``s``,
    ``V = (n/2) int_0^s g(t) t**(n/2 - 1) dt``.  The first interval uses exact
    moments of the spline polynomial, the others 8-point Gauss-Legendre.
    """
    g = CubicSpline(s, 1.0 / f)
    a = 0.5 * n - 1.0
    c = g.c[:, 0]  # coefficients of (t - s0)**(3-k), s0 = 0
    s1 = s[1]
    first = sum(c[k] * s1 ** (3 - k + a + 1) / (3 - k + a + 1) for k in range(4))
    lo, hi = s[1:-1], s[2:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * _GL_T[None, :]
    vals = g(nodes) * nodes ** a
    parts = half * (vals @ _GL_W)
    cum = np.concatenate(([0.0, first], first + np.cumsum(parts)))
    return 0.5 * n * cum


def _q_from_V(V, x, f0):
    q = np.empty_like(V)
    q[0] = 1.0 / f0
    q[1:] = V[1:] / x[1:]
    return q


def _pressure_from_q(p, q, s):
    """``P_inf + int_x^M G y r**(2-2n) dy`` as a function on the nodes."""
    n = p.n
    integrand = 0.5 * n * p.G * (n * q) ** ((2.0 - 2.0 * n) / n)
    anti = CubicSpline(s, integrand).antiderivative()
    return p.P_inf + (anti(s[-1]) - anti(s))


def fixed_point_solve(p: ModelParams, N: int = 2000, tol: float = 1e-12,
                      relax: float = 1.0, max_iter: int = 1000) -> StationaryProfile:
    """Solve the stationary problem by damped iteration of the density map.

    ``I(f) = ((P_inf + int_x^M G y r_f**(2-2n) dy) / A)**(1/gamma)`` with
    ``r_f**n = n int_0^x 1/f``.  Starting from the edge density the undamped
    iterates increase monotonically.  Convergence is declared when
    ``max|I(f) - f| / max f < tol``; the damping halves whenever that
    residual grows.
    """
    _check_accepted(p)
    if not 0 < relax <= 1:
        raise ValueError("relax must lie in (0, 1]")
    if N < MIN_N:
        raise ValueError(f"N must be at least {MIN_N}")
    n = p.n
    x = np.linspace(0.0, p.M, N + 1)
    s = x ** (2.0 / n)
    f = np.full(N + 1, p.rho_edge)
    prev = np.inf
    for it in range(1, max_iter + 1):
        V = _volume(f, s, n)
        q = _q_from_V(V, x, f[0])
        Pf = _pressure_from_q(p, q, s)
        If = (Pf / p.A) ** (1.0 / p.gamma)
        res = np.max(np.abs(If - f)) / np.max(f)
        if res < tol:
            f = If
            break
        if res > prev:
            relax *= 0.5
        prev = res
        f = f + relax * (If - f)
    else:
        raise StationarySolveError(
            f"fixed point not converged after {max_iter} iterations (residual {res:.3e})")
    V = _volume(f, s, n)
    return _profile(p, N, f[0], f, V, "fixed_point", it)


# --- energy and stability ----------------------------------------------

def _gravity_potential(n, V):
    """``Phi(V) = int_1^V (n h)**((2-2n)/n) dh``."""
    V = np.asarray(V, dtype=float)
    if n == 2:
        return 0.5 * np.log(V)
    e = (2.0 - n) / n
    return n ** ((2.0 - 2.0 * n) / n) * (n / (2.0 - n)) * (V ** e - 1.0)


def potential_energy_S(p: ModelParams, V) -> float:
    """Static potential energy of a specific-volume profile on the mass grid.

    ``V`` holds node values at ``x_j = j M / N`` with ``V[0] = 0``.  The
    internal and external-pressure terms use the cellwise slope; the
    gravitational term uses the trapezoid rule with its ``x -> 0`` limit 0.
    """
    V = np.asarray(V, dtype=float)
    N = V.size - 1
    if N < 1:
        raise ValueError("need at least two nodes")
    dV = np.diff(V)
    if np.any(dV <= 0):
        raise ValueError("V must be strictly increasing")
    h = p.M / N
    slope = dV / h
    internal = p.A / (p.gamma - 1.0) * h * np.sum(slope ** (1.0 - p.gamma))
    external = p.P_inf * (V[-1] - V[0])
    x = np.linspace(0.0, p.M, N + 1)
    grav = np.zeros(N + 1)
    if p.G != 0:
        grav[1:] = p.G * x[1:] * _gravity_potential(p.n, V[1:])
    gravity = h * (np.sum(grav) - 0.5 * (grav[0] + grav[-1]))
    return float(internal + external + gravity)


GRADING = 8.0  # eigenproblem mesh x_k = M (k/N)**GRADING


def _profile_interpolants(profile: StationaryProfile):
    """Cubic splines of ``rho`` and ``V/x`` in ``s = x**(2/n)``, where both are smooth."""
    p = profile.params
    x = profile.x
    s = x ** (2.0 / p.n)
    q = _q_from_V(profile.V, x, profile.rho[0])
    return CubicSpline(s, profile.rho), CubicSpline(s, q)


def _stability_matrices(profile: StationaryProfile, grading: float = GRADING):
    p = profile.params
    n = p.n
    N = profile.N
    xg = p.M * np.linspace(0.0, 1.0, N + 1) ** grading
    he = np.diff(xg)
    xm = 0.5 * (xg[1:] + xg[:-1])
    rho_s, q_s = _profile_interpolants(profile)
    sm = xm ** (2.0 / n)
    rho_m = rho_s(sm)
    V_m = q_s(sm) * xm
    stiff = p.gamma * p.A * rho_m ** (1.0 + p.gamma) / he
    pot = (2.0 * n - 2.0) * p.G * xm * (n * V_m) ** ((2.0 - 3.0 * n) / n) * he
    wgt = 0.25 * he / xm ** 2
    # tridiagonal assembly; exact P1 mass for the potential, midpoint W/x for the weight
    Jd = np.zeros(N + 1)
    Bd = np.zeros(N + 1)
    Jd[:-1] += stiff - pot / 3.0
    Jd[1:] += stiff - pot / 3.0
    Jo = -stiff - pot / 6.0
    Bd[:-1] += 1.0 / he + wgt
    Bd[1:] += 1.0 / he + wgt
    Bo = -1.0 / he + wgt
    # drop the W(0) = 0 row and column
    J = np.diag(Jd[1:]) + np.diag(Jo[1:], 1) + np.diag(Jo[1:], -1)
    B = np.diag(Bd[1:]) + np.diag(Bo[1:], 1) + np.diag(Bo[1:], -1)
    return J, B


def stability_min_eigen(profile: StationaryProfile) -> float:
    """Smallest generalized eigenvalue of the second variation of ``S``.

    Piecewise-linear ``W`` with ``W(0) = 0``; ``J`` is the stiffness of
    ``gamma A rho**(1+gamma) W_x**2`` minus the gravitational mass term, and
    the weight is ``|W_x|**2 + |W/x|**2`` with the midpoint value of ``W/x``.

    The lowest mode behaves like ``x**beta`` near the centre with ``beta``
    only a little above 1/2, so the ``N`` elements are graded towards the
    centre; profile data is interpolated in ``x**(2/n)``.
    """
    J, B = _stability_matrices(profile)
    try:
        w = linalg.eigh(J, B, eigvals_only=True, subset_by_index=[0, 0])
    except linalg.LinAlgError as exc:
        raise StationarySolveError(f"singular weight matrix: {exc}") from exc
    return float(w[0])


def pressure_integral(profile: StationaryProfile) -> np.ndarray:
    """``int_x^M G y r**(2-2n) dy`` at the nodes, trapezoid rule in ``s = x**(2/n)``."""
    p = profile.params
    n = p.n
    x = profile.x
    s = x ** (2.0 / n)
    q = _q_from_V(profile.V, x, profile.rho[0])
    integrand = 0.5 * n * p.G * (n * q) ** ((2.0 - 2.0 * n) / n)
    pieces = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(s)
    tail = np.concatenate((np.cumsum(pieces[::-1])[::-1], [0.0]))
    return tail


def verify_stationary_identity(profile: StationaryProfile) -> float:
    """Max-norm residual of ``A rho**gamma - P_inf - int_x^M G y r**(2-2n) dy``."""
    p = profile.params
    lhs = p.A * profile.rho ** p.gamma
    return float(np.max(np.abs(lhs - p.P_inf - pressure_integral(profile))))
