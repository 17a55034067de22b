"""Model constants, constitutive laws, forcing and coordinate conversion.

Everything here is dimensionless.  The fluid occupies the Lagrangian mass
interval ``[0, M]``; ``x`` is the enclosed mass and ``r`` the radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

__all__ = [
    "ModelParams",
    "ForcingSpec",
    "Violation",
    "ValidationReport",
    "ParameterError",
    "validate_params",
    "pressure",
    "viscosity",
    "body_force",
    "EulerianSamples",
    "eulerian_samples",
    "lagrangian_coordinates",
]


class ParameterError(ValueError):
    """Raised when a solver is handed parameters that fail validation."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("invalid model parameters: " + "; ".join(str(v) for v in report.violations))


@dataclass(frozen=True)
class ModelParams:
    n: int = 3
    gamma: float = 5.0 / 3.0
    A: float = 1.0
    theta: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    G: float = 1.0
    P_inf: float = 0.1
    M: float = 1.0

    @property
    def alpha(self) -> float:
        return 1.5 - self.n

    @property
    def gamma_critical(self) -> float:
        """The exponent ``(2n-2)/n`` separating the A1 branches."""
        return (2.0 * self.n - 2.0) / self.n

    @property
    def rho_edge(self) -> float:
        """Density at which the polytropic pressure equals ``P_inf``."""
        return (self.P_inf / self.A) ** (1.0 / self.gamma)

    def replace(self, **changes) -> "ModelParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ModelParams(**values)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


FORCING_KINDS = ("none", "exp_decay")
FORCE_SHAPES = ("bump", "uniform")


@dataclass(frozen=True)
class ForcingSpec:
    """Decaying perturbations of the boundary pressure and of the body force.

    ``delta_P(t) = pressure_amp * exp(-pressure_rate * t)`` and
    ``delta_f(x, r, t) = force_amp * exp(-force_rate * t) * s(x / M) * min(1, r)``
    where ``s`` is ``sin(pi * xi)**2`` for the ``bump`` shape and 1 for
    ``uniform``.  Both envelopes are bounded by ``amp * exp(-rate * t)``.
    """

    pressure_kind: str = "none"
    pressure_amp: float = 0.0
    pressure_rate: float = 0.0
    force_kind: str = "none"
    force_amp: float = 0.0
    force_rate: float = 0.0
    force_shape: str = "bump"

    def __post_init__(self):
        if self.pressure_kind not in FORCING_KINDS:
            raise ValueError(f"unknown pressure_kind {self.pressure_kind!r}")
        if self.force_kind not in FORCING_KINDS:
            raise ValueError(f"unknown force_kind {self.force_kind!r}")
        if self.force_shape not in FORCE_SHAPES:
            raise ValueError(f"unknown force_shape {self.force_shape!r}")
        if self.pressure_rate < 0 or self.force_rate < 0:
            raise ValueError("decay rates must be non-negative")

    @property
    def active_pressure_amp(self) -> float:
        return self.pressure_amp if self.pressure_kind == "exp_decay" else 0.0

    @property
    def active_force_amp(self) -> float:
        return self.force_amp if self.force_kind == "exp_decay" else 0.0

    @property
    def shape_code(self) -> int:
        return FORCE_SHAPES.index(self.force_shape)

    def delta_P(self, t):
        return self.active_pressure_amp * np.exp(-self.pressure_rate * np.asarray(t, dtype=float))

    def delta_f(self, x, r, t, M: float = 1.0):
        amp = self.active_force_amp
        x = np.asarray(x, dtype=float)
        r = np.asarray(r, dtype=float)
        if amp == 0.0:
            return np.zeros(np.broadcast(x, r).shape)
        envelope = amp * math.exp(-self.force_rate * float(t))
        if self.force_shape == "bump":
            shape = np.sin(np.pi * x / M) ** 2
        else:
            shape = np.ones_like(x)
        return envelope * shape * np.minimum(1.0, r)

    def packed(self) -> tuple:
        return (
            self.active_pressure_amp,
            self.pressure_rate,
            self.active_force_amp,
            self.force_rate,
            float(self.shape_code),
        )


NO_FORCING = ForcingSpec()


@dataclass(frozen=True)
class Violation:
    condition: str
    value: float
    detail: str = ""

    def __str__(self):
        text = f"{self.condition} violated (value={self.value:.6g})"
        return f"{text}: {self.detail}" if self.detail else text


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()
    notes: tuple = ()
    a1_branch: str = ""
    quantities: dict = field(default_factory=dict, compare=False)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def summary(self) -> str:
        if self.ok:
            lines = [f"accept (A1 branch: {self.a1_branch})"]
        else:
            lines = ["reject"] + [f"  - {v}" for v in self.violations]
        lines += [f"  note: {note}" for note in self.notes]
        return "\n".join(lines)


def discriminant(n: int, c1: float, c2: float) -> float:
    """Left-hand side of the viscosity-ratio condition; must be negative."""
    a = 1.5 - n
    lin = 2 * c1 * a + c2 * (2 * n - 2 + a)
    quad = 4 * (2 * c1 + c2) * (2 * c1 * (n - 1) + c2 * (n - 1) * (n - 1 + a))
    return lin * lin - quad


def delta3(p: ModelParams) -> float:
    n = p.n
    base = p.A * p.gamma * n ** ((2 * n - 2) / n) / ((n - 1) * p.G * p.M ** (2.0 / n))
    return base ** (n / (2 * n - 2 - n * p.gamma))


def validate_params(p: ModelParams) -> ValidationReport:
    """Check the structural assumptions on the model constants.

    Never raises: every failing condition is listed in the returned report
    together with the quantity that was evaluated.
    """
    violations = []
    notes = []
    q = {}

    def need(cond, name, value, detail=""):
        if not cond:
            violations.append(Violation(name, float(value), detail))

    n = p.n
    need(isinstance(n, (int, np.integer)) and not isinstance(n, bool) and n >= 2,
         "n>=2 integer", n)
    need(p.gamma > 1, "gamma>1", p.gamma,
         "the isothermal case gamma=1 is not supported")
    need(p.A > 0, "A>0", p.A)
    need(p.theta >= 0, "theta>=0", p.theta)
    need(p.P_inf > 0, "P_inf>0", p.P_inf)
    need(p.M > 0, "M>0", p.M)
    need(p.G >= 0, "G>=0", p.G)
    need(p.c1 > 0, "c1>0", p.c1)
    if violations and any(v.condition == "n>=2 integer" for v in violations):
        return ValidationReport(tuple(violations), tuple(notes), "", q)

    bulk = 2 * p.c1 + n * p.c2
    q["2c1+nc2"] = bulk
    need(bulk > 0, "2c1+nc2>0", bulk)
    disc = discriminant(n, p.c1, p.c2)
    q["discriminant"] = disc
    need(disc < 0, "discriminant<0", disc, "viscosity ratio c2/c1 outside the admissible band")

    branch = ""
    gc = p.gamma_critical
    if p.gamma > 1 and p.A > 0 and p.M > 0 and p.G >= 0:
        if p.G == 0:
            branch = "G=0"
            notes.append("G=0: the hydrostatic profile is constant; "
                         "the uniqueness argument assumes G>0")
        elif math.isclose(p.gamma, gc, rel_tol=1e-12):
            mass_term = p.G * n ** ((2.0 - n) / n) * p.M ** (2.0 / n)
            q["A1_mass_term"] = mass_term
            branch = "critical"
            need(mass_term < 2 * p.A, "A1", mass_term,
                 "gamma=(2n-2)/n requires G*n^((2-n)/n)*M^(2/n) < 2A")
        elif p.gamma > gc:
            branch = "supercritical"
        else:
            d3 = delta3(p)
            lhs = p.P_inf + 0.5 * p.G * n ** ((2.0 - n) / n) * p.M ** (2.0 / n) * d3 ** ((2 * n - 2.0) / n)
            rhs = p.A * d3 ** p.gamma
            q["A1_delta3_margin"] = rhs - lhs
            branch = "subcritical"
            need(lhs <= rhs, "A1", lhs - rhs,
                 "gamma<(2n-2)/n and the delta_3 invariant-set condition fails")
            if lhs <= rhs:
                notes.append("subcritical gamma: a stationary profile exists but "
                             "uniqueness is not guaranteed")
    return ValidationReport(tuple(violations), tuple(notes), branch, q)


def _positive(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise ValueError("density must be positive")
    return rho


def pressure(p: ModelParams, rho):
    """Polytropic pressure ``A * rho**gamma``."""
    out = p.A * _positive(rho) ** p.gamma
    return float(out) if out.ndim == 0 else out


def viscosity(p: ModelParams, rho):
    """Return ``(mu, lambda) = (c1 rho**theta, c2 rho**theta)``."""
    scale = _positive(rho) ** p.theta
    mu, lam = p.c1 * scale, p.c2 * scale
    if scale.ndim == 0:
        return float(mu), float(lam)
    return mu, lam


def body_force(p: ModelParams, forcing: ForcingSpec, x, r, t):
    """Self-gravity ``G x / r**(n-1)`` plus the forcing perturbation."""
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    out = p.G * x / r ** (p.n - 1) + forcing.delta_f(x, r, t, p.M)
    return float(out) if np.ndim(out) == 0 else out


class EulerianSamples(NamedTuple):
    r: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    boundary_radius: float


def eulerian_samples(obj) -> EulerianSamples:
    """Express a discrete state or a stationary profile in Eulerian form.

    For a state the triples are ``(r_j, rho_j, u_j)`` for ``j = 0..N`` and the
    boundary radius is ``r_{N+1}``; for a profile they are the node values with
    zero velocity and the boundary radius is ``l_inf``.
    """
    if hasattr(obj, "l_inf"):
        r = np.asarray(obj.r, dtype=float)
        rho = np.asarray(obj.rho, dtype=float)
        u = np.zeros_like(r)
        boundary = float(obj.l_inf)
    else:
        N = len(obj.rho) - 1
        r = np.asarray(obj.r[: N + 1], dtype=float)
        rho = np.asarray(obj.rho, dtype=float)
        u = np.asarray(obj.u[: N + 1], dtype=float)
        boundary = float(obj.r[N + 1])
        if not boundary > r[-1]:
            raise ValueError("corrupted state: boundary radius is not outermost")
    if np.any(rho <= 0):
        raise ValueError("corrupted state: nonpositive density")
    if np.any(np.diff(r) <= 0):
        raise ValueError("corrupted state: radii are not strictly increasing")
    return EulerianSamples(r, rho, u, boundary)


def lagrangian_coordinates(r, rho, n: int) -> np.ndarray:
    """Enclosed mass ``x(r) = int_0^r y**(n-1) rho dy`` at the sample radii.

    Integrated by the trapezoid rule in the volume variable ``r**n / n``; the
    first sample is taken as the origin of mass.
    """
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    vol = r ** n / n
    dx = 0.5 * (rho[1:] + rho[:-1]) * np.diff(vol)
    return np.concatenate(([0.0], np.cumsum(dx)))
