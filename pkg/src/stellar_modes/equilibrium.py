"""Admissible spherically symmetric equilibria for a prescribed entropy law.

The equation of state is P = rho^gamma exp(S/C_V) with S = Sigma(omega) and
omega = rho^(gamma-1). The star is found by shooting the potential-like
variable u outward from a center series until omega first vanishes.

Usage:
    eos = EosSpec(gamma=1.5)
    star = build_equilibrium(eos, rho_center=1.0)
    report = check_admissible(star)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import PchipInterpolator, make_interp_spline
from scipy.optimize import brentq

from stellar_modes.config import Tolerances
from stellar_modes.errors import (
    DomainError,
    EosError,
    IntegratorError,
    InversionError,
    NoFiniteRadius,
    SurfaceFitError,
)
from stellar_modes.utils import (
    clustered_radii,
    cumulative_radial,
    even_polyfit,
    rational_approximation,
    theta_grid,
)

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from scipy.integrate import OdeSolution

logger = logging.getLogger(__name__)

_CENTER_FIT_WINDOW = 0.1
_SURFACE_FIT_WINDOW = 0.05
_VACUUM_WINDOW = 0.01


# ---------------------------------------------------------------------------
# Equation of state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntropyLaw:
    """Entropy as a function of omega = rho^(gamma-1).

    Evaluates Sigma(arg_scale * omega) + offset, which keeps tau-rescaled
    laws exact without refitting.
    """

    kind: str = "polynomial"
    coefficients: tuple[float, ...] = (0.0,)
    omega: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    arg_scale: float = 1.0
    offset: float = 0.0

    @classmethod
    def constant(cls, value: float = 0.0) -> EntropyLaw:
        return cls(kind="polynomial", coefficients=(float(value),))

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> EntropyLaw:
        """Polynomial law with coefficients in increasing powers of omega."""
        coeffs = tuple(float(c) for c in coefficients) or (0.0,)
        return cls(kind="polynomial", coefficients=coeffs)

    @classmethod
    def table(cls, omega: Sequence[float], values: Sequence[float]) -> EntropyLaw:
        """Tabulated law interpolated by a monotone cubic (PCHIP) spline."""
        if len(omega) != len(values) or len(omega) < 2:
            raise DomainError("Entropy table needs matching omega/values of length >= 2")
        if np.any(np.diff(omega) <= 0):
            raise DomainError("Entropy table omega must be strictly increasing")
        return cls(
            kind="table",
            omega=tuple(float(w) for w in omega),
            values=tuple(float(v) for v in values),
        )

    @cached_property
    def _evaluators(self) -> tuple[Callable, Callable, Callable]:
        if self.kind == "polynomial":
            poly = Polynomial(self.coefficients)
            return poly, poly.deriv(1), poly.deriv(2)
        spline = PchipInterpolator(self.omega, self.values, extrapolate=True)
        return spline, spline.derivative(1), spline.derivative(2)

    @property
    def is_constant(self) -> bool:
        if self.kind == "polynomial":
            return all(c == 0.0 for c in self.coefficients[1:])
        return len(set(self.values)) == 1

    def __call__(self, omega: np.ndarray | float) -> np.ndarray:
        f, _, _ = self._evaluators
        return f(self.arg_scale * np.asarray(omega, dtype=float)) + self.offset

    def derivative(self, omega: np.ndarray | float, order: int = 1) -> np.ndarray:
        """d^order Sigma / d omega^order evaluated at omega."""
        evaluator = self._evaluators[order]
        return self.arg_scale**order * evaluator(self.arg_scale * np.asarray(omega, dtype=float))

    def rescaled(self, tau: float, gamma: float, c_v: float) -> EntropyLaw:
        """Law of the star rho(r) = tau rho_1(tau r)."""
        return replace(
            self,
            arg_scale=self.arg_scale * tau ** (1.0 - gamma),
            offset=self.offset - gamma * c_v * math.log(tau),
        )


@dataclass(frozen=True)
class EosSpec:
    """Ideal-fluid equation of state with a prescribed entropy law."""

    gamma: float
    c_v: float = 1.0
    sigma: EntropyLaw = field(default_factory=EntropyLaw.constant)
    grav_const: float = 1.0

    def __post_init__(self) -> None:
        if not 1.0 < self.gamma < 2.0:
            raise EosError(f"gamma must satisfy 1 < gamma < 2, got {self.gamma}", gamma=self.gamma)
        if self.c_v <= 0.0:
            raise EosError(f"c_v must be positive, got {self.c_v}", c_v=self.c_v)
        if self.grav_const <= 0.0:
            raise DomainError(f"grav_const must be positive, got {self.grav_const}")

    @property
    def nu(self) -> float:
        return 1.0 / (self.gamma - 1.0)

    def ellipticity(self, omega: np.ndarray | float) -> np.ndarray:
        """gamma + ((gamma-1)/C_V) omega Sigma'(omega); must stay positive."""
        w = np.asarray(omega, dtype=float)
        return self.gamma + (self.gamma - 1.0) / self.c_v * w * self.sigma.derivative(w, 1)

    def check_ellipticity(self, omega_max: float, samples: int = 257) -> None:
        """Raise EosError if ellipticity fails anywhere on [0, omega_max]."""
        w = np.linspace(0.0, omega_max, samples)
        values = self.ellipticity(w)
        if np.any(values <= 0.0):
            bad = w[np.argmin(values)]
            raise EosError(
                "Ellipticity violated on the working range",
                omega=float(bad), value=float(values.min()),
            )

    def energy_factors(self, omega: np.ndarray | float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (du/domega, d2u/domega2, exp(Sigma/C_V)) at omega >= 0."""
        w = np.maximum(np.asarray(omega, dtype=float), 0.0)
        s1 = self.sigma.derivative(w, 1) / self.c_v
        s2 = self.sigma.derivative(w, 2) / self.c_v
        e = np.exp(self.sigma(w) / self.c_v)
        fp = (self.nu + 1.0 + w * s1) * e
        fpp = (s1 + w * s2) * e + fp * s1
        return fp, fpp, e


def eos_pressure(rho: np.ndarray | float, eos: EosSpec) -> np.ndarray | float:
    """Pressure f^P(rho) = rho^gamma exp(Sigma(rho^(gamma-1))/C_V).

    Args:
        rho: Density, scalar or array, non-negative.
        eos: Equation of state.

    Returns:
        Pressure with the same shape as ``rho``.

    Raises:
        DomainError: If any density is negative.
    """
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("Density must be non-negative", rho=arr.min())
    omega = arr ** (eos.gamma - 1.0)
    pressure = arr**eos.gamma * np.exp(eos.sigma(omega) / eos.c_v)
    return float(pressure) if np.ndim(rho) == 0 else pressure


def eos_u_and_inverse(
    eos: EosSpec,
) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """Return the enthalpy-like map f_u and its inverse f_rho.

    f_u(rho) is the integral of (df^P/drho)/rho from 0, written in omega as
    u = omega e(omega) + nu * integral_0^omega e, with e = exp(Sigma/C_V).
    f_rho(u) returns 0 for u <= 0.

    Args:
        eos: Equation of state.

    Returns:
        Tuple (f_u, f_rho) of scalar callables.
    """
    nu = eos.nu

    def u_of_omega(omega: float) -> float:
        if omega <= 0.0:
            return 0.0
        e = math.exp(float(eos.sigma(omega)) / eos.c_v)
        if eos.sigma.is_constant:
            return (nu + 1.0) * omega * e
        tail, _ = quad(lambda w: math.exp(float(eos.sigma(w)) / eos.c_v), 0.0, omega,
                       epsabs=0.0, epsrel=1e-13, limit=200)
        return omega * e + nu * tail

    def f_u(rho: float) -> float:
        if rho < 0.0:
            raise DomainError("Density must be non-negative", rho=rho)
        return u_of_omega(rho ** (eos.gamma - 1.0))

    def f_rho(u: float) -> float:
        if u <= 0.0:
            return 0.0
        hi = u / (nu + 1.0)
        for _ in range(200):
            if u_of_omega(hi) >= u:
                break
            hi *= 2.0
        else:
            raise InversionError("Cannot bracket the inverse of f_u", u=u, omega_hi=hi)
        try:
            omega = brentq(lambda w: u_of_omega(w) - u, 0.0, hi, xtol=1e-15 * hi, rtol=4e-16)
        except ValueError as e:
            raise InversionError(f"Inversion failed: {e}", u=u, bracket=(0.0, hi)) from e
        return omega**nu

    return f_u, f_rho


def lane_emden_radius(n: float, rtol: float = 1e-13) -> float:
    """First zero xi_1 of the Lane-Emden equation of index n.

    Independent of the omega formulation: integrates theta'' = -theta^n -
    2 theta'/xi from the series 1 - xi^2/6 + n xi^4/120.

    Raises:
        NoFiniteRadius: If theta has no zero before xi = 1e3.
    """
    xi0 = 1e-6
    y0 = [1.0 - xi0**2 / 6.0 + n * xi0**4 / 120.0, -xi0 / 3.0 + n * xi0**3 / 30.0]

    def rhs(xi: float, y: np.ndarray) -> list[float]:
        return [y[1], -max(y[0], 0.0) ** n - 2.0 * y[1] / xi]

    def zero(xi: float, y: np.ndarray) -> float:
        return y[0]

    zero.terminal = True
    zero.direction = -1
    sol = solve_ivp(rhs, (xi0, 1e3), y0, method="DOP853", rtol=rtol, atol=1e-15, events=zero)
    if not sol.t_events[0].size:
        raise NoFiniteRadius(f"Lane-Emden index {n} has no zero before xi = 1e3", n=n)
    return float(sol.t_events[0][0])


# ---------------------------------------------------------------------------
# Equilibrium star
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Sampling and shooting parameters for build_equilibrium."""

    nodes: int = 801
    start_factor: float = 1e-6
    r_max_factor: float = 1e3


@dataclass(frozen=True)
class Fields:
    """Background fields and their analytic radial derivatives at given radii."""

    r: np.ndarray
    omega: np.ndarray
    domega: np.ndarray
    ddomega: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    ddrho: np.ndarray
    P: np.ndarray
    dP: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    S: np.ndarray
    dS: np.ndarray
    ddS: np.ndarray
    e: np.ndarray
    fp: np.ndarray
    fpp: np.ndarray
    c2: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class _Orbit:
    """Center series plus dense output of the shooting integration."""

    solution: OdeSolution
    r_start: float
    u_O: float
    omega_O: float
    a2: float
    a4: float
    b2: float
    b4: float


@dataclass(frozen=True)
class EquilibriumStar:
    """Immutable radial background on a clustered grid with limit constants."""

    eos: EosSpec
    radius_R: float
    grid_r: np.ndarray
    rho: np.ndarray
    P: np.ndarray
    S: np.ndarray
    Phi: np.ndarray
    dPhi_dr: np.ndarray
    rho_O: float
    rho_O1: float
    P_O1: float
    g_O: float
    nu: float
    C_rho: float
    c_R_sq: float
    g_R: float
    N_R_sq: float
    N_O1_sq: float
    rational_nu: tuple[int, int] | None
    length_scale: float
    surface_fit_residual: float
    orbit: _Orbit = field(repr=False, compare=False)

    @property
    def grav_const(self) -> float:
        return self.eos.grav_const

    @property
    def theta(self) -> np.ndarray:
        return theta_grid(len(self.grid_r))

    @cached_property
    def fields(self) -> Fields:
        """Fields sampled on the star grid."""
        return self.fields_at(self.grid_r)

    @property
    def mass(self) -> float:
        return self.radius_R**2 * self.g_R / self.grav_const

    def fields_at(self, r: np.ndarray | float) -> Fields:
        """Evaluate all background fields at radii in [0, R].

        Uses the center series below the shooting start and the integrator's
        dense output elsewhere; derivatives come from the structure equations.

        Args:
            r: Radius or array of radii.

        Returns:
            Fields with arrays of the same length as ``r``.
        """
        return _evaluate_fields(self.eos, self.orbit, self.radius_R, r)

    def metadata(self) -> dict[str, Any]:
        """JSON-ready record of the equation of state and all limit constants."""
        sigma = self.eos.sigma
        return {
            "gamma": self.eos.gamma,
            "c_v": self.eos.c_v,
            "grav_const": self.eos.grav_const,
            "sigma_kind": sigma.kind,
            "sigma_coefficients": list(sigma.coefficients),
            "sigma_arg_scale": sigma.arg_scale,
            "sigma_offset": sigma.offset,
            "radius_R": self.radius_R,
            "mass": self.mass,
            "nodes": len(self.grid_r),
            "rho_O": self.rho_O,
            "rho_O1": self.rho_O1,
            "P_O1": self.P_O1,
            "g_O": self.g_O,
            "nu": self.nu,
            "rational_nu": list(self.rational_nu) if self.rational_nu else None,
            "C_rho": self.C_rho,
            "c_R_sq": self.c_R_sq,
            "g_R": self.g_R,
            "N_R_sq": self.N_R_sq,
            "N_O1_sq": self.N_O1_sq,
            "length_scale": self.length_scale,
            "surface_fit_residual": self.surface_fit_residual,
        }

    def profile_table(self) -> list[dict[str, float]]:
        """Rows (r, rho, P, S, Phi, g, c2, A, N2) on the star grid."""
        f = self.fields
        gc = self.eos.gamma * self.eos.c_v
        schwarzschild = -f.dS / gc
        brunt = f.g * f.dS / gc
        return [
            {
                "r": float(f.r[i]), "rho": float(self.rho[i]), "P": float(self.P[i]),
                "S": float(self.S[i]), "Phi": float(self.Phi[i]), "g": float(self.dPhi_dr[i]),
                "c2": float(f.c2[i]), "A": float(schwarzschild[i]), "N2": float(brunt[i]),
            }
            for i in range(len(self.grid_r))
        ]


def build_equilibrium(
    eos: EosSpec,
    rho_center: float,
    grid_spec: GridSpec | None = None,
    *,
    rho_center_bound: float | None = None,
    tolerances: Tolerances | None = None,
) -> EquilibriumStar:
    """Shoot the structure equations from the center to the first zero of rho.

    Args:
        eos: Equation of state.
        rho_center: Central density rho_O > 0.
        grid_spec: Grid and shooting parameters.
        rho_center_bound: Largest admissible rho_O when gamma <= 4/3.
        tolerances: Numerical tolerances.

    Returns:
        The populated EquilibriumStar.

    Raises:
        DomainError: Invalid rho_center or bound exceeded.
        EosError: Ellipticity violated on [0, omega_O].
        NoFiniteRadius: No surface before r_max.
        SurfaceFitError: Surface asymptotics do not fit.
    """
    grid_spec = grid_spec or GridSpec()
    tol = tolerances or Tolerances()
    if rho_center <= 0.0:
        raise DomainError(f"rho_center must be positive, got {rho_center}")
    if eos.gamma <= 4.0 / 3.0 and rho_center_bound is not None and rho_center > rho_center_bound:
        raise DomainError(
            "rho_center exceeds the caller-supplied bound for gamma <= 4/3",
            rho_center=rho_center, bound=rho_center_bound,
        )

    nu = eos.nu
    big_g = eos.grav_const
    omega_O = rho_center ** (eos.gamma - 1.0)
    eos.check_ellipticity(omega_O)
    f_u, _ = eos_u_and_inverse(eos)
    u_O = f_u(rho_center)
    scale = math.sqrt(u_O / (4.0 * math.pi * big_g * rho_center))

    fp_O, fpp_O, _ = (float(x) for x in eos.energy_factors(omega_O))
    a2 = -(2.0 * math.pi / 3.0) * big_g * rho_center
    a4 = -(math.pi / 5.0) * big_g * (nu * omega_O ** (nu - 1.0) / fp_O) * a2
    b2 = a2 / fp_O
    b4 = a4 / fp_O - 0.5 * fpp_O * a2**2 / fp_O**3
    r0 = grid_spec.start_factor * scale
    y0 = [
        omega_O + b2 * r0**2 + b4 * r0**4,
        2.0 * a2 * r0 + 4.0 * a4 * r0**3,
        u_O + a2 * r0**2 + a4 * r0**4,
    ]

    def rhs(r: float, y: np.ndarray) -> list[float]:
        w = max(y[0], 0.0)
        fp, _, _ = eos.energy_factors(w)
        return [y[1] / float(fp), -2.0 * y[1] / r - 4.0 * math.pi * big_g * w**nu, y[1]]

    def surface(r: float, y: np.ndarray) -> float:
        return y[0]

    surface.terminal = True
    surface.direction = -1

    atol = 1e-15 * np.array([omega_O, u_O / scale, u_O])
    sol = solve_ivp(
        rhs, (r0, grid_spec.r_max_factor * scale), y0, method="DOP853",
        rtol=tol.integrator_rtol, atol=atol, dense_output=True, events=surface,
    )
    if sol.status == -1:
        raise IntegratorError(f"Equilibrium integration failed: {sol.message}")
    if not sol.t_events[0].size:
        raise NoFiniteRadius(
            "No surface found before r_max",
            gamma=eos.gamma, rho_center=rho_center, r_max=grid_spec.r_max_factor * scale,
        )
    radius = float(sol.t_events[0][0])
    v_R = float(sol.y_events[0][0][1])
    logger.debug("Surface at R=%.12g (R/l=%.12g), nfev=%d", radius, radius / scale, sol.nfev)

    orbit = _Orbit(sol.sol, r0, u_O, omega_O, a2, a4, b2, b4)
    grid = clustered_radii(radius, grid_spec.nodes)
    sampled = _evaluate_fields(eos, orbit, radius, grid)

    s = radius - grid
    window = (s > 0.0) & (s <= _SURFACE_FIT_WINDOW * radius)
    c_rho, fit_residual = _surface_fit(s[window], sampled.rho[window], nu)
    if fit_residual > tol.surface_fit:
        raise SurfaceFitError(
            "Surface density does not follow C_rho (R-r)^nu",
            residual=fit_residual, threshold=tol.surface_fit,
        )

    fp_R, _, e_R = (float(x) for x in eos.energy_factors(0.0))
    domega_R = v_R / fp_R
    g_R = -v_R
    c_R_sq = eos.gamma * c_rho ** (eos.gamma - 1.0) * e_R
    center = (grid > 0.0) & (grid <= _SURFACE_FIT_WINDOW * radius)
    p_coeffs, _ = even_polyfit(grid[center], sampled.rho[center] * sampled.g[center] / grid[center], 4)
    P_O1 = float(p_coeffs[0])
    g_O = P_O1 / rho_center
    gc = eos.gamma * eos.c_v
    n_r, d_r, exact = rational_approximation(nu)

    star = EquilibriumStar(
        eos=eos,
        radius_R=radius,
        grid_r=grid,
        rho=sampled.rho,
        P=sampled.P,
        S=sampled.S,
        Phi=-sampled.u - radius * g_R,
        dPhi_dr=sampled.g,
        rho_O=rho_center,
        rho_O1=float(-2.0 * nu * omega_O ** (nu - 1.0) * b2),
        P_O1=P_O1,
        g_O=g_O,
        nu=nu,
        C_rho=c_rho,
        c_R_sq=c_R_sq,
        g_R=g_R,
        N_R_sq=float(g_R * eos.sigma.derivative(0.0, 1) * domega_R / gc),
        N_O1_sq=float(4.0 * g_O * eos.sigma.derivative(omega_O, 1) * b2 / gc),
        rational_nu=(n_r, d_r) if exact else None,
        length_scale=scale,
        surface_fit_residual=fit_residual,
        orbit=orbit,
    )
    logger.info("Built equilibrium: gamma=%.6g rho_O=%.6g R=%.10g M=%.10g",
                eos.gamma, rho_center, radius, star.mass)
    return star


def _evaluate_fields(
    eos: EosSpec, orbit: _Orbit, radius: float, r: np.ndarray | float,
) -> Fields:
    nu = eos.nu
    big_g = eos.grav_const
    r = np.clip(np.atleast_1d(np.asarray(r, dtype=float)), 0.0, radius)

    omega = np.empty_like(r)
    v = np.empty_like(r)
    u = np.empty_like(r)
    dv = np.empty_like(r)

    inner = r < orbit.r_start
    z = r[inner]
    omega[inner] = orbit.omega_O + orbit.b2 * z**2 + orbit.b4 * z**4
    v[inner] = 2.0 * orbit.a2 * z + 4.0 * orbit.a4 * z**3
    u[inner] = orbit.u_O + orbit.a2 * z**2 + orbit.a4 * z**4
    dv[inner] = 2.0 * orbit.a2 + 12.0 * orbit.a4 * z**2

    outer = ~inner
    if np.any(outer):
        state = orbit.solution(r[outer])
        omega[outer] = state[0]
        v[outer] = state[1]
        u[outer] = state[2]
    surface = r >= radius
    omega[surface] = 0.0
    u[surface] = 0.0
    omega = np.maximum(omega, 0.0)
    rho = omega**nu
    dv[outer] = -2.0 * v[outer] / r[outer] - 4.0 * np.pi * big_g * rho[outer]

    fp, fpp, e = eos.energy_factors(omega)
    domega = v / fp
    ddomega = (dv - fpp * domega**2) / fp
    # rho'' is unbounded at the surface when nu < 2.
    with np.errstate(divide="ignore", invalid="ignore"):
        drho = nu * omega ** (nu - 1.0) * domega
        ddrho = nu * (nu - 1.0) * omega ** (nu - 2.0) * domega**2 + nu * omega ** (nu - 1.0) * ddomega
    s1 = eos.sigma.derivative(omega, 1)
    s2 = eos.sigma.derivative(omega, 2)
    return Fields(
        r=r,
        omega=omega,
        domega=domega,
        ddomega=ddomega,
        rho=rho,
        drho=drho,
        ddrho=ddrho,
        P=omega * rho * e,
        dP=rho * v,
        g=-v,
        dg=-dv,
        S=eos.sigma(omega),
        dS=s1 * domega,
        ddS=s2 * domega**2 + s1 * ddomega,
        e=e,
        fp=fp,
        fpp=fpp,
        c2=eos.gamma * omega * e,
        u=u,
    )


def _surface_fit(s: np.ndarray, rho: np.ndarray, nu: float, degree: int = 4) -> tuple[float, float]:
    design = s[:, None] ** (nu + np.arange(degree + 1))[None, :]
    coeffs, *_ = np.linalg.lstsq(design, rho, rcond=None)
    scale = max(float(np.max(np.abs(rho))), np.finfo(float).tiny)
    residual = float(np.max(np.abs(design @ coeffs - rho)) / scale)
    return float(coeffs[0]), residual


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissibilityCheck:
    name: str
    passed: bool
    value: float
    threshold: float | None = None


@dataclass(frozen=True)
class AdmissibilityReport:
    """Per-condition outcome of check_admissible."""

    checks: tuple[AdmissibilityCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> AdmissibilityCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "value": c.value, "threshold": c.threshold}
                for c in self.checks
            ],
        }


def check_admissible(
    star: EquilibriumStar, tolerances: Tolerances | None = None,
) -> AdmissibilityReport:
    """Check the admissibility conditions on the sampled profiles.

    Works from the stored arrays only, so hand-edited stars are checked
    faithfully.

    Args:
        star: Equilibrium to check.
        tolerances: Thresholds for the fit and residual checks.

    Returns:
        AdmissibilityReport carrying every measured value.
    """
    tol = tolerances or Tolerances()
    r, rho, pressure = star.grid_r, star.rho, star.P
    radius = star.radius_R
    checks: list[AdmissibilityCheck] = []

    interior_min = float(np.min(rho[:-1]))
    surface_rho = abs(float(rho[-1])) / star.rho_O
    checks.append(AdmissibilityCheck("support", interior_min > 0.0 and surface_rho <= 1e-12, surface_rho, 1e-12))

    for name, values in (("monotone_rho", rho), ("monotone_P", pressure)):
        worst = float(np.max(np.diff(values)))
        checks.append(AdmissibilityCheck(name, worst < 0.0, worst, 0.0))

    center = r <= _CENTER_FIT_WINDOW * radius
    coeffs, center_residual = even_polyfit(r[center], rho[center], 5)
    rho_O1 = -2.0 * float(coeffs[1])
    checks.append(AdmissibilityCheck("center_sign", rho_O1 > 0.0, rho_O1, 0.0))
    checks.append(AdmissibilityCheck("center_even_fit", center_residual <= tol.center_fit,
                                     center_residual, tol.center_fit))

    s = radius - r
    near = (s > 0.0) & (s <= _VACUUM_WINDOW * radius) & (rho > 0.0)
    if np.count_nonzero(near) >= 3:
        omega = rho[near] ** (1.0 / star.nu)
        slope = float(np.polyfit(np.log(s[near]), np.log(omega), 1)[0])
    else:
        slope = float("nan")
    checks.append(AdmissibilityCheck("physical_vacuum", abs(slope - 1.0) <= tol.vacuum_slope,
                                     slope, tol.vacuum_slope))

    window = (s > 0.0) & (s <= _SURFACE_FIT_WINDOW * radius)
    _, surface_residual = _surface_fit(s[window], rho[window], star.nu)
    checks.append(AdmissibilityCheck("surface_fit", surface_residual <= tol.surface_fit,
                                     surface_residual, tol.surface_fit))

    mass = 4.0 * np.pi * cumulative_radial(rho * r**2, radius)
    body = (r >= 0.01 * radius) & (r <= 0.99 * radius)
    g_poisson = star.grav_const * mass[body] / r[body] ** 2
    poisson = float(np.max(np.abs(star.dPhi_dr[body] - g_poisson)) / np.max(np.abs(star.dPhi_dr)))
    checks.append(AdmissibilityCheck("poisson", poisson <= tol.poisson, poisson, tol.poisson))

    theta = star.theta
    dP = make_interp_spline(theta, pressure, k=5).derivative()(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        dP = dP / (0.5 * radius * np.sin(theta))
    bulk = (r >= 0.05 * radius) & (r <= 0.95 * radius)
    hydro = float(np.max(np.abs(dP[bulk] + rho[bulk] * star.dPhi_dr[bulk])) / np.max(np.abs(dP[bulk])))
    checks.append(AdmissibilityCheck("hydrostatic", hydro <= tol.hydrostatic, hydro, tol.hydrostatic))

    report = AdmissibilityReport(tuple(checks))
    if not report.passed:
        logger.warning("Admissibility failures: %s", ", ".join(report.failures()))
    return report


def boundary_coefficients(
    star: EquilibriumStar, tolerances: Tolerances | None = None,
) -> dict[str, float]:
    """Center and surface limit constants, refitted from the sampled profiles.

    Raises:
        SurfaceFitError: If the surface fit residual exceeds the threshold.
    """
    tol = tolerances or Tolerances()
    r, radius = star.grid_r, star.radius_R
    s = radius - r
    window = (s > 0.0) & (s <= _SURFACE_FIT_WINDOW * radius)
    c_rho, residual = _surface_fit(s[window], star.rho[window], star.nu)
    if residual > tol.surface_fit:
        raise SurfaceFitError("Surface fit residual above threshold",
                              residual=residual, threshold=tol.surface_fit)
    center = (r > 0.0) & (r <= _SURFACE_FIT_WINDOW * radius)
    coeffs, _ = even_polyfit(r[center], star.rho[center] * star.dPhi_dr[center] / r[center], 4)
    P_O1 = float(coeffs[0])
    e_R = math.exp(float(star.eos.sigma(0.0)) / star.eos.c_v)
    return {
        "rho_O1": star.rho_O1,
        "P_O1": P_O1,
        "g_O": P_O1 / star.rho_O,
        "C_rho": c_rho,
        "c_R_sq": star.eos.gamma * c_rho ** (star.eos.gamma - 1.0) * e_R,
        "g_R": star.g_R,
        "N_R_sq": star.N_R_sq,
        "N_O1_sq": star.N_O1_sq,
    }


def rescale_tau(
    star: EquilibriumStar, tau: float, tolerances: Tolerances | None = None,
) -> EquilibriumStar:
    """Star with rho(r) = tau rho_1(tau r) and S(r) = S_1(tau r) - gamma C_V log tau.

    Args:
        star: Reference star.
        tau: Positive scale factor.
        tolerances: Numerical tolerances for the rebuild.

    Returns:
        The rescaled star (``star`` itself when tau == 1).

    Raises:
        DomainError: If tau <= 0.
    """
    if tau <= 0.0:
        raise DomainError(f"tau must be positive, got {tau}")
    if tau == 1.0:
        return star
    eos = star.eos
    scaled_eos = replace(eos, sigma=eos.sigma.rescaled(tau, eos.gamma, eos.c_v))
    return build_equilibrium(
        scaled_eos, tau * star.rho_O, GridSpec(nodes=len(star.grid_r)), tolerances=tolerances,
    )
