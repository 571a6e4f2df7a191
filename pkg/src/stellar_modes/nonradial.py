"""Nonradial (l >= 1) spectra through the reduced second-order equation.

The first-order system in xi = V^r and eta = Lagrangian pressure
perturbation reads

    -xi'  = A11 xi + A12 eta + A10
    -eta' = A21 xi + A22 eta + A20

and eliminating xi gives eta'' + A eta' + B eta + C1 dPhi' + C0 dPhi = 0.
For the g branch the eigen parameter is Lambda = 1/lambda with weight
kappa = l(l+1) frakN^2 / r^2; for the p branch it is lambda itself with
weight 1/c^2 at fixed mu = 1/lambda. A true mode is a fixed point of the
parametrized problem, located by bracketed root finding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.interpolate import CubicSpline, make_interp_spline
from scipy.linalg import eigh
from scipy.optimize import brentq

from stellar_modes.config import Tolerances
from stellar_modes.errors import (
    DomainError,
    GModeAssumptionViolated,
    NoRootInWindow,
    TransformError,
)
from stellar_modes.gravity import HlOperator, check_condition_G, solve_delta_phi
from stellar_modes.profiles import (
    GoughAux,
    PModeAux,
    Profiles,
    background_profiles,
    g_over_r_derivative,
    gough_factors,
    lambda0_default,
    mean_density,
    mu0_default,
    pmode_factors,
)
from stellar_modes.sl_solver import LiouvilleProblem, sl_eigenfunction, sl_eigenvalues
from stellar_modes.utils import cumulative_radial, log_grid, radial_weights, theta_grid

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from stellar_modes.equilibrium import EquilibriumStar

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Grid helpers
# ---------------------------------------------------------------------------

def _col(values: np.ndarray, like: np.ndarray) -> np.ndarray:
    return values.reshape((-1,) + (1,) * (np.ndim(like) - 1))


def _over_r(values: np.ndarray, r: np.ndarray, center: float) -> np.ndarray:
    out = np.empty_like(values)
    body = r > 0.0
    out[body] = values[body] / r[body]
    out[~body] = center
    return out


def _fill_ends(values: np.ndarray) -> np.ndarray:
    out = np.array(values, copy=True)
    out[0] = out[1]
    out[-1] = out[-2]
    return out


def _interior(r: np.ndarray, radius: float, layer: float) -> np.ndarray:
    return (r > layer * radius) & (r < radius * (1.0 - layer))


def _theta_spline_derivatives(values: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """d/dr and d2/dr2 of grid samples via a quintic spline in the grid angle."""
    values = np.asarray(values)
    if np.iscomplexobj(values):
        re = _theta_spline_derivatives(values.real, radius)
        im = _theta_spline_derivatives(values.imag, radius)
        return re[0] + 1j * im[0], re[1] + 1j * im[1]
    theta = theta_grid(len(values))
    spline = make_interp_spline(theta, values, k=5, axis=0)
    jac = _col(0.5 * radius * np.sin(theta), values)
    djac = _col(0.5 * radius * np.cos(theta), values)
    f1 = spline.derivative(1)(theta)
    f2 = spline.derivative(2)(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = f1 / jac
        d2 = (f2 - d1 * djac) / jac**2
    # dr/dtheta vanishes at both ends, where d/dr = f_thetatheta / r_thetatheta.
    d1[0] = f2[0] / djac[0]
    d1[-1] = f2[-1] / djac[-1]
    d2[0] = d2[1]
    d2[-1] = d2[-2]
    return d1, d2


def radial_derivative(values: np.ndarray, radius: float) -> np.ndarray:
    """d/dr of samples on the clustered star grid."""
    return _theta_spline_derivatives(values, radius)[0]


# ---------------------------------------------------------------------------
# First-order system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GoughSystemCoeffs:
    """Coefficients of the (xi, eta) system at fixed (l, lambda).

    Center samples of the singular coefficients are nan.
    """

    l: int
    lam: float
    r: np.ndarray = field(repr=False)
    A11: np.ndarray = field(repr=False)
    A12: np.ndarray = field(repr=False)
    A21: np.ndarray = field(repr=False)
    A22: np.ndarray = field(repr=False)
    A10: np.ndarray = field(repr=False)
    A20: np.ndarray = field(repr=False)

    @property
    def L(self) -> float:
        return self.l * (self.l + 1) / self.lam

    def residual(
        self, xi: np.ndarray, eta: np.ndarray, radius: float, layer: float = 0.05,
    ) -> tuple[float, float]:
        """Relative max residuals of both equations away from the endpoints."""
        inside = _interior(self.r, radius, layer)
        dxi = radial_derivative(xi, radius)
        deta = radial_derivative(eta, radius)
        first = dxi + self.A11 * xi + self.A12 * eta + self.A10
        second = deta + self.A21 * xi + self.A22 * eta + self.A20
        scale_1 = max(float(np.max(np.abs(dxi[inside]))), np.finfo(float).tiny)
        scale_2 = max(float(np.max(np.abs(deta[inside]))), np.finfo(float).tiny)
        return (
            float(np.max(np.abs(first[inside]))) / scale_1,
            float(np.max(np.abs(second[inside]))) / scale_2,
        )


def gough_system_coeffs(
    star: EquilibriumStar,
    l: int,
    lam: float,
    delta_phi: tuple[np.ndarray, np.ndarray] | None = None,
    profiles: Profiles | None = None,
) -> GoughSystemCoeffs:
    """Sample A11, A12, A21, A22 and the potential terms A10, A20.

    Args:
        star: Admissible equilibrium.
        l: Degree >= 1.
        lam: Eigenvalue parameter lambda > 0.
        delta_phi: Optional (dPhi, r dPhi/dr) on the star grid; omitted in
            Cowling mode, where A10 = A20 = 0.
        profiles: Precomputed background profiles.

    Returns:
        GoughSystemCoeffs on the star grid.

    Raises:
        DomainError: If lam <= 0, where L = l(l+1)/lambda is undefined.
    """
    if lam <= 0.0:
        raise DomainError(f"The (xi, eta) system needs lambda > 0, got {lam}")
    prof = profiles or background_profiles(star)
    aux = gough_factors(star, l, lam, profiles=prof)
    r = prof.r
    big_l = aux.L0 / lam
    gr = prof.g_over_r
    with np.errstate(divide="ignore", invalid="ignore"):
        a22 = big_l * gr / r
        a11 = 2.0 / r - a22
        a12 = (1.0 - big_l * prof.c2 / r**2) / (prof.c2 * prof.rho)
    a21 = aux.L0 * prof.rho * gr**2 * aux.E / lam
    for coeff in (a11, a12, a22):
        coeff[0] = np.nan

    if delta_phi is None:
        a10 = np.zeros_like(r)
        a20 = np.zeros_like(r)
    else:
        x, xdot = (np.asarray(v, dtype=float) for v in delta_phi)
        with np.errstate(divide="ignore", invalid="ignore"):
            a10 = -big_l * x / r**2
            a20 = prof.rho * (xdot / r + big_l * gr * x / r)
        a10[0] = a20[0] = np.nan
    return GoughSystemCoeffs(l=l, lam=lam, r=r, A11=a11, A12=a12, A21=a21, A22=a22, A10=a10, A20=a20)


# ---------------------------------------------------------------------------
# Reduced equation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedCoeffs:
    """Coefficients of eta'' + A eta' + B eta + C1 dPhi' + C0 dPhi = 0.

    ``kappa`` is the weight of the eigen parameter (kappa for the g branch,
    1/c^2 for the p branch) and ``p`` the integrating factor exp(int A).
    The density perturbation is -(alpha dPhi + beta r dPhi' + y_deta eta' +
    y_eta eta); the gravity families are

        A  = A_base + B1
        B0 = B01 + B02 + B03 + B04
        C1 = C11 + C12,  C0 = C01 + C02
    """

    branch: str
    l: int
    param: float
    grav_pert: float
    r: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    dA: np.ndarray = field(repr=False)
    B0: np.ndarray = field(repr=False)
    kappa: np.ndarray = field(repr=False)
    dlog_kappa: np.ndarray = field(repr=False)
    ddlog_kappa: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    inv_A21: np.ndarray = field(repr=False)
    inv_A21_L: np.ndarray = field(repr=False)
    y_deta: np.ndarray = field(repr=False)
    y_eta: np.ndarray = field(repr=False)
    B1: np.ndarray = field(repr=False)
    B01: np.ndarray = field(repr=False)
    B02: np.ndarray = field(repr=False)
    B03: np.ndarray = field(repr=False)
    B04: np.ndarray = field(repr=False)
    C11: np.ndarray = field(repr=False)
    C12: np.ndarray = field(repr=False)
    C01: np.ndarray = field(repr=False)
    C02: np.ndarray = field(repr=False)

    @property
    def lam(self) -> float:
        if self.branch == "g":
            return self.param
        return math.inf if self.param == 0.0 else 1.0 / self.param

    @property
    def eigen_weight(self) -> float:
        """Factor multiplying kappa in B: 1/lambda (g) or lambda (p)."""
        return 1.0 / self.lam if self.branch == "g" else self.lam

    @property
    def B(self) -> np.ndarray:
        return self.kappa * self.eigen_weight + self.B0

    @property
    def C1(self) -> np.ndarray:
        return self.C11 + self.C12

    @property
    def C0(self) -> np.ndarray:
        return self.C01 + self.C02

    @property
    def w(self) -> np.ndarray:
        return self.p * self.kappa

    @property
    def m(self) -> np.ndarray:
        """Liouville amplitude (p w)^(1/4) with eta = y / m."""
        with np.errstate(invalid="ignore"):
            return np.sqrt(self.p) * self.kappa**0.25

    @property
    def dlog_m(self) -> np.ndarray:
        return 0.5 * self.A + 0.25 * self.dlog_kappa

    def eta_from_y(self, y: np.ndarray, y_x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(eta, eta') on the star grid from the normal-form y and dy/dx."""
        m = _col(self.m, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            eta = y / m
            deta = (_col(np.sqrt(self.kappa), y) * y_x - _col(self.dlog_m, y) * y) / m
        return eta, deta

    def source(self, eta: np.ndarray, deta: np.ndarray) -> np.ndarray:
        """Y such that dPhi = 4 pi G H_l[alpha dPhi + beta r dPhi' + Y]."""
        return _col(self.y_deta, eta) * deta + _col(self.y_eta, eta) * eta

    def forcing(self, x: np.ndarray, xdot: np.ndarray) -> np.ndarray:
        """Normal-form perturbation -m (C1 dPhi' + C0 dPhi) / kappa."""
        r = self.r
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi = xdot / _col(r, xdot)
        dphi[0] = dphi[1] if self.l == 1 else 0.0
        with np.errstate(invalid="ignore"):
            scale = -self.m / self.kappa
            return _col(scale, x) * (_col(self.C1, x) * dphi + _col(self.C0, x) * x)


def _assemble(
    star: EquilibriumStar,
    prof: Profiles,
    branch: str,
    l: int,
    param: float,
    gp: float,
    *,
    dlog_e: np.ndarray,
    l_dlog_e: np.ndarray,
    inv_a21: np.ndarray,
    inv_a21_l: np.ndarray,
    b01: np.ndarray,
    b02: np.ndarray,
    kappa: np.ndarray,
    dlog_kappa: np.ndarray,
    ddlog_kappa: np.ndarray,
    p: np.ndarray,
) -> ReducedCoeffs:
    r = prof.r
    radius = star.radius_R
    rho = prof.rho
    gr = prof.g_over_r
    dgr_over_gr = g_over_r_derivative(prof) / gr
    drho_r = _over_r(prof.drho, r, -star.rho_O1)
    four_pi_g = 4.0 * math.pi * gp

    with np.errstate(divide="ignore", invalid="ignore"):
        y_deta = -prof.drho * inv_a21
        y_eta = -drho_r * inv_a21_l * gr - 1.0 / prof.c2
        b1 = -four_pi_g * rho * y_deta
        b03 = -four_pi_g * rho * (y_eta + 1.0 / prof.c2)
        b04 = four_pi_g * rho / prof.c2
        b0 = b01 + b02 + b03 + b04

        a = 2.0 / r - 2.0 * dgr_over_gr - prof.drho / rho - dlog_e + b1
        # A r (R - r) is smooth: A ~ 2/r at the center and nu/(R - r) at the surface.
        z = a * r * (radius - r)
    z[0] = 2.0 * radius
    z[-1] = star.nu * radius
    dz = radial_derivative(z, radius)
    with np.errstate(divide="ignore", invalid="ignore"):
        da = (dz - a * (radius - 2.0 * r)) / (r * (radius - r))
        b = 0.25 * a**2 + 0.5 * da - b0
        q = b / kappa + (ddlog_kappa - 0.25 * dlog_kappa**2) / (4.0 * kappa)

        c11 = rho * (-2.0 * dgr_over_gr - dlog_e)
        c12 = -four_pi_g * rho**2 * y_deta
        c01 = _fill_ends(-gr * rho * l_dlog_e / r)
        c02 = four_pi_g * rho**2 * drho_r * inv_a21_l * gr
    c01[-1] = 0.0

    return ReducedCoeffs(
        branch=branch, l=l, param=param, grav_pert=gp, r=r,
        A=a, dA=da, B0=b0, kappa=kappa, dlog_kappa=dlog_kappa, ddlog_kappa=ddlog_kappa,
        p=p, b=b, q=q, inv_A21=inv_a21, inv_A21_L=inv_a21_l, y_deta=y_deta, y_eta=y_eta,
        B1=b1, B01=b01, B02=b02, B03=b03, B04=b04, C11=c11, C12=c12, C01=c01, C02=c02,
    )


def reduced_coeffs(
    star: EquilibriumStar,
    l: int,
    lam: float,
    aux: GoughAux | None = None,
    *,
    cowling: bool = False,
    profiles: Profiles | None = None,
) -> ReducedCoeffs:
    """g-branch coefficients A, B, K pieces, kappa and b at fixed lambda.

    Args:
        star: Admissible equilibrium.
        l: Degree >= 1.
        lam: lambda in [0, lambda0].
        aux: Precomputed GoughAux; its grav_pert decides the coupling.
        cowling: Build the factors without the potential perturbation
            when ``aux`` is not given.
        profiles: Precomputed background profiles.

    Returns:
        ReducedCoeffs with branch "g" and param = lambda.
    """
    prof = profiles or background_profiles(star)
    if aux is None:
        aux = gough_factors(star, l, lam, grav_pert=0.0 if cowling else None, profiles=prof)
    r = prof.r
    rho = prof.rho
    gr = prof.g_over_r
    big_e = aux.E
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_a21 = lam / (aux.L0 * rho * gr**2 * big_e)
        inv_a21_l = 1.0 / (rho * gr**2 * big_e)
        ep1 = 4.0 * gr - 4.0 * math.pi * star.grav_const * rho
        b01 = (ep1 + lam) / prof.c2
        b02 = -aux.L0 / r**2
    kappa = np.array(aux.kappa, copy=True)
    if np.any(~(kappa > 0.0) | ~np.isfinite(kappa)):
        raise TransformError(
            f"g-mode weight kappa is not positive for l={l}, lambda={lam:.6g}", l=l, lam=lam,
        )
    dlog_kappa, ddlog_kappa = _theta_spline_derivatives(np.log(kappa), star.radius_R)
    with np.errstate(divide="ignore"):
        p = 1.0 / aux.W**2
    return _assemble(
        star, prof, "g", l, lam, aux.grav_pert,
        dlog_e=aux.dE / big_e,
        l_dlog_e=(aux.dE1 + lam * aux.dE2) / big_e,
        inv_a21=inv_a21, inv_a21_l=inv_a21_l, b01=b01, b02=b02,
        kappa=kappa, dlog_kappa=dlog_kappa, ddlog_kappa=ddlog_kappa, p=p,
    )


def pmode_coeffs(
    star: EquilibriumStar,
    l: int,
    mu: float,
    aux: PModeAux | None = None,
    *,
    cowling: bool = False,
    profiles: Profiles | None = None,
) -> ReducedCoeffs:
    """p-branch coefficients at fixed mu = 1/lambda with weight 1/c^2."""
    prof = profiles or background_profiles(star)
    if aux is None:
        aux = pmode_factors(star, l, mu, grav_pert=0.0 if cowling else None, profiles=prof)
    f = prof.fields
    r = prof.r
    rho = prof.rho
    gr = prof.g_over_r
    L0 = aux.L0
    dlog_ep = aux.dEp / aux.Ep
    dgr_over_gr = g_over_r_derivative(prof) / gr
    c_v = star.eos.c_v
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_a21 = -mu / (rho * aux.Ep)
        inv_a21_l = -L0 * mu**2 / (rho * aux.Ep)
        b01 = aux.Ep1 / prof.c2
        b02 = -L0 * (1.0 - mu * aux.frakN2p) / r**2
        kappa = 1.0 / prof.c2
        # log(1/c^2) = -log(omega) - S/C_V + const.
        dlog_kappa = -(f.domega / f.omega + f.dS / c_v)
        ddlog_kappa = -(f.ddomega / f.omega - (f.domega / f.omega) ** 2 + f.ddS / c_v)
    return _assemble(
        star, prof, "p", l, mu, aux.grav_pert,
        dlog_e=dlog_ep - 2.0 * dgr_over_gr,
        l_dlog_e=L0 * mu * (dlog_ep - 2.0 * dgr_over_gr),
        inv_a21=inv_a21, inv_a21_l=inv_a21_l, b01=b01, b02=b02,
        kappa=kappa, dlog_kappa=dlog_kappa, ddlog_kappa=ddlog_kappa, p=aux.Wp,
    )


# ---------------------------------------------------------------------------
# Liouville problems
# ---------------------------------------------------------------------------

def gmode_endpoint_strengths(star: EquilibriumStar, l: int) -> tuple[float, float]:
    """Inverse-square strengths l(l+1) and nu(nu+2)/4 of the g-branch potential."""
    nu = star.nu
    return float(l * (l + 1)), nu * (nu + 2.0) / 4.0


def pmode_endpoint_strengths(star: EquilibriumStar, l: int) -> tuple[float, float]:
    """Inverse-square strengths l(l+1) and (2nu+1)(2nu+3)/4 of the p-branch potential."""
    nu = star.nu
    return float(l * (l + 1)), (2.0 * nu + 1.0) * (2.0 * nu + 3.0) / 4.0


@dataclass(frozen=True)
class _GravityPerturbation:
    """Normal-form perturbation y -> m F / w through the coupled potential solve."""

    star: EquilibriumStar
    coeffs: ReducedCoeffs
    aux: GoughAux | PModeAux
    x: np.ndarray
    inside: np.ndarray
    tolerances: Tolerances

    def __call__(self, x_mesh: np.ndarray) -> np.ndarray:
        n = len(x_mesh)
        nodes = np.concatenate([[0.0], x_mesh, [self.x[-1]]])
        basis = np.zeros((n + 2, n))
        basis[1:-1] = np.eye(n)
        spline = CubicSpline(nodes, basis, axis=0)
        eta, deta = self.coeffs.eta_from_y(spline(self.x), spline(self.x, 1))
        source = np.where(self.inside[:, None], self.coeffs.source(eta, deta), 0.0)
        solution = solve_delta_phi(
            source, self.star, self.coeffs.l, self.coeffs.lam, self.aux, self.tolerances,
            method="dense",
        )
        forcing = self.coeffs.forcing(solution.X, solution.Xdot)
        forcing = np.where(self.inside[:, None], forcing, 0.0)
        return make_interp_spline(self.x, forcing, k=1, axis=0)(x_mesh)


@dataclass(frozen=True)
class NonradialSetup:
    """Liouville problem together with the data needed to map modes back."""

    problem: LiouvilleProblem
    coeffs: ReducedCoeffs
    aux: GoughAux | PModeAux
    x: np.ndarray = field(repr=False)
    inside: np.ndarray = field(repr=False)

    @property
    def x_plus(self) -> float:
        return self.problem.x_plus


def nonradial_setup(
    star: EquilibriumStar,
    l: int,
    branch: str,
    param: float,
    cowling: bool = False,
    tolerances: Tolerances | None = None,
    profiles: Profiles | None = None,
) -> NonradialSetup:
    """Build the Liouville problem of one branch at fixed lambda (g) or mu (p).

    Raises:
        DomainError: For an unknown branch.
        TransformError: If the weight is not positive or x_plus diverges.
    """
    tol = tolerances or Tolerances()
    prof = profiles or background_profiles(star)
    if branch == "g":
        aux: GoughAux | PModeAux = gough_factors(
            star, l, param, grav_pert=0.0 if cowling else None, profiles=prof,
        )
        coeffs = reduced_coeffs(star, l, param, aux, profiles=prof)
        k_left, k_right = gmode_endpoint_strengths(star, l)
    elif branch == "p":
        aux = pmode_factors(star, l, param, grav_pert=0.0 if cowling else None, profiles=prof)
        coeffs = pmode_coeffs(star, l, param, aux, profiles=prof)
        k_left, k_right = pmode_endpoint_strengths(star, l)
    else:
        raise DomainError(f"Unknown nonradial branch {branch!r}")

    r = prof.r
    with np.errstate(invalid="ignore"):
        speed = np.sqrt(coeffs.kappa)
    x = cumulative_radial(speed, star.radius_R)
    x_plus = float(x[-1])
    if not (math.isfinite(x_plus) and x_plus > 0.0):
        raise TransformError(f"Transformed interval is not finite: x_plus={x_plus}")
    inside = _interior(r, star.radius_R, tol.boundary_layer)
    inside &= np.isfinite(coeffs.q)

    perturbation = None
    # At mu = 0 the p-branch forcing vanishes identically.
    if aux.grav_pert > 0.0 and not (branch == "p" and param == 0.0):
        perturbation = _GravityPerturbation(star, coeffs, aux, x, inside, tol)
    problem = LiouvilleProblem.from_samples(
        x[inside], coeffs.q[inside], x_plus, k_left, k_right, perturbation,
        label=f"{branch}-mode l={l}",
    )
    return NonradialSetup(problem=problem, coeffs=coeffs, aux=aux, x=x, inside=inside)


def check_gmode_assumption(star: EquilibriumStar) -> float:
    """min over the grid of (1/r) dS/dr; raises unless it is positive.

    Raises:
        GModeAssumptionViolated: If the star is not stably stratified
            everywhere.
    """
    f = star.fields
    ratio = _over_r(f.dS, f.r, np.nan)
    ratio[0] = ratio[1]
    value = float(np.min(ratio))
    if not value > 0.0:
        raise GModeAssumptionViolated(
            "g modes need (1/r) dS/dr >= delta > 0 on [0, R]",
            min_value=value, r=float(f.r[int(np.argmin(ratio))]),
        )
    return value


def gmode_problem(
    star: EquilibriumStar,
    l: int,
    lam: float,
    cowling: bool = False,
    tolerances: Tolerances | None = None,
) -> LiouvilleProblem:
    """g-branch problem -y'' + q y + f(y) = Lambda y at fixed lambda.

    Args:
        star: Stably stratified equilibrium.
        l: Degree >= 1.
        lam: lambda in [0, lambda0].
        cowling: Drop the potential perturbation.
        tolerances: Tolerances; uses boundary_layer.

    Returns:
        LiouvilleProblem with x = int sqrt(kappa) dr.

    Raises:
        GModeAssumptionViolated: If dS/dr / r is not positive.
    """
    check_gmode_assumption(star)
    return nonradial_setup(star, l, "g", lam, cowling, tolerances).problem


def pmode_problem(
    star: EquilibriumStar,
    l: int,
    mu: float,
    cowling: bool = False,
    tolerances: Tolerances | None = None,
) -> LiouvilleProblem:
    """p-branch problem at fixed mu = 1/lambda with x = int dr / c.

    Raises:
        MuTooLarge: If Ep <= 0 somewhere.
    """
    return nonradial_setup(star, l, "p", mu, cowling, tolerances).problem


# ---------------------------------------------------------------------------
# Conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    """Coupling and smallness quantities of the g-branch existence argument."""

    l: int
    lambda0_used: float
    delta_G: float
    delta_B0: float
    delta_B1: float
    epsilon_B: float
    C_B1: float
    C_B2: float
    constant: float
    passed_G: bool
    passed_B0: bool
    passed_B1: bool
    passed_B2: bool

    @property
    def passed(self) -> bool:
        return self.passed_G and self.passed_B0 and self.passed_B1 and self.passed_B2

    def to_dict(self) -> dict[str, Any]:
        return {
            "l": self.l,
            "lambda0_used": self.lambda0_used,
            "delta_G": self.delta_G,
            "delta_B0": self.delta_B0,
            "delta_B1": self.delta_B1,
            "epsilon_B": self.epsilon_B,
            "C_B1": self.C_B1,
            "C_B2": self.C_B2,
            "constant": self.constant,
            "passed": self.passed,
        }


def check_B_conditions(
    star: EquilibriumStar,
    l: int,
    lambda0: float | None = None,
    tolerances: Tolerances | None = None,
) -> ConditionReport:
    """Evaluate delta_G, the (B0) and (B1) quantities and epsilon_B.

    delta_B0 = lambda0 sup (1 + rho/<rho>)/<rho> and
    delta_B1 = sup -(1/r)(drho/dr)/<rho>. epsilon_B = C (2l+1)^-1 (C_B1 + C_B2)
    with C = 1 and the sup-norms C_B1 = sup |4 pi G r^2 C1 / g| and
    C_B2 = sup |4 pi G r^3 C0 / (L g)| taken at lambda0 outside the
    boundary layers.
    """
    tol = tolerances or Tolerances()
    prof = background_profiles(star)
    lam0 = lambda0 if lambda0 is not None else lambda0_default(star, l, tol.eps_E)
    big_g = star.grav_const
    mean = mean_density(star)

    aux = gough_factors(star, l, lam0, profiles=prof)
    delta_g = check_condition_G(star, l, lam0, aux)
    delta_b0 = float(lam0 * np.max((1.0 + prof.rho / mean) / mean))
    drho_r = _over_r(prof.drho, prof.r, -star.rho_O1)
    delta_b1 = float(np.max(-drho_r / mean))

    coeffs = reduced_coeffs(star, l, lam0, aux, profiles=prof)
    inside = _interior(prof.r, star.radius_R, tol.boundary_layer)
    r = prof.r[inside]
    gr = prof.g_over_r[inside]
    big_l = aux.L0 / lam0
    four_pi_g = 4.0 * math.pi * aux.grav_pert
    c_b1 = float(np.max(np.abs(four_pi_g * r * coeffs.C1[inside] / gr)))
    c_b2 = float(np.max(np.abs(four_pi_g * r**2 * coeffs.C0[inside] / (big_l * gr))))
    constant = 1.0
    eps_b = constant * (c_b1 + c_b2) / (2 * l + 1)

    report = ConditionReport(
        l=l, lambda0_used=lam0, delta_G=delta_g, delta_B0=delta_b0, delta_B1=delta_b1,
        epsilon_B=eps_b, C_B1=c_b1, C_B2=c_b2, constant=constant,
        passed_G=delta_g <= tol.delta_G,
        passed_B0=big_g * delta_b0 <= tol.delta_B0,
        passed_B1=delta_b1 <= tol.delta_B1,
        passed_B2=eps_b <= tol.epsilon_B,
    )
    logger.debug("Conditions l=%d: %s", l, report.to_dict())
    return report


# ---------------------------------------------------------------------------
# Mode fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeFields:
    """Displacement and Eulerian perturbations of one mode on the star grid."""

    r: np.ndarray
    Vr: np.ndarray
    Vh: np.ndarray
    drho: np.ndarray
    dP: np.ndarray
    dPhi: np.ndarray
    eta: np.ndarray | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def xi(self) -> np.ndarray:
        return self.Vr


def _mass_norm(star: EquilibriumStar, l: int, vr: np.ndarray, vh: np.ndarray) -> float:
    f = star.fields
    w = radial_weights(star.radius_R, len(f.r)) * f.r**2 * f.rho
    return float(np.sqrt(np.sum(w * (np.abs(vr) ** 2 + l * (l + 1) * np.abs(vh) ** 2))))


def reconstruct_mode(
    xi: np.ndarray,
    eta: np.ndarray,
    delta_phi: np.ndarray,
    star: EquilibriumStar,
    l: int,
    lam: float,
) -> ModeFields:
    """Rebuild V^r, V^h, drho, dP and dPhi from (xi, eta, dPhi).

    V^h = [r eta/(rho c^2) + r xi' + 2 xi] / (l(l+1)),
    drho = -rho' xi + eta/c^2 and dP = eta + rho g xi.

    Raises:
        DomainError: If lam == 0.
    """
    if lam == 0.0:
        raise DomainError("Mode reconstruction needs lambda != 0")
    f = star.fields
    L0 = l * (l + 1)
    xi = np.asarray(xi)
    eta = np.asarray(eta)
    dxi = radial_derivative(xi, star.radius_R)
    with np.errstate(divide="ignore", invalid="ignore"):
        compress = np.nan_to_num(f.r * eta / (star.eos.gamma * f.P), nan=0.0, posinf=0.0, neginf=0.0)
        drho = -f.drho * xi + np.nan_to_num(eta / f.c2, nan=0.0, posinf=0.0, neginf=0.0)
    compress[-1] = compress[-2]
    vh = (compress + f.r * dxi + 2.0 * xi) / L0
    d_p = eta + f.rho * f.g * xi
    norm = _mass_norm(star, l, xi, vh)
    return ModeFields(
        r=f.r, Vr=xi, Vh=vh, drho=drho, dP=d_p, dPhi=np.asarray(delta_phi), eta=eta,
        diagnostics={"mass_norm": norm, "lam": float(lam)},
    )


def displacement_fields(
    vr: np.ndarray,
    vh: np.ndarray,
    star: EquilibriumStar,
    l: int,
    grav_pert: float | None = None,
    dvr: np.ndarray | None = None,
) -> ModeFields:
    """Eulerian drho, dP and dPhi generated by a displacement (V^r, V^h).

    drho = -(1/r^2)(r^2 rho V^r)' + l(l+1) rho V^h / r,
    dP = (gamma P/rho) drho + gamma P A V^r and dPhi = -4 pi G H_l[drho].
    Extra trailing axes are carried through.
    """
    prof = background_profiles(star)
    f = prof.fields
    r = f.r
    L0 = l * (l + 1)
    gp = star.grav_const if grav_pert is None else grav_pert
    vr = np.asarray(vr)
    vh = np.asarray(vh)
    if dvr is None:
        dvr = radial_derivative(vr, star.radius_R)
    rho = _col(f.rho, vr)
    rr = _col(r, vr)
    with np.errstate(divide="ignore", invalid="ignore"):
        drho = -(2.0 * rho / rr + _col(f.drho, vr)) * vr - rho * dvr + L0 * rho * vh / rr
    drho[0] = 0.0
    gamma = star.eos.gamma
    d_p = gamma * _col(f.omega * f.e, vr) * drho + gamma * _col(f.P * prof.A, vr) * vr
    if gp > 0.0:
        d_phi = -4.0 * math.pi * gp * HlOperator.for_star(star, l).apply(drho)
    else:
        d_phi = np.zeros_like(drho)
    return ModeFields(r=r, Vr=vr, Vh=vh, drho=drho, dP=d_p, dPhi=d_phi)


@dataclass(frozen=True)
class OperatorResidual:
    radial: float
    horizontal: float
    scale: float

    @property
    def relative(self) -> float:
        return max(self.radial, self.horizontal) / self.scale


def operator_residual(
    fields: ModeFields,
    star: EquilibriumStar,
    l: int,
    lam: float,
    layer: float = 0.02,
) -> OperatorResidual:
    """Weighted L^2 residual of L V - lambda V away from the endpoints.

    L^r V = dP'/rho + g drho/rho + dPhi' and L^h V = (dP/rho + dPhi)/r.
    """
    f = star.fields
    r = f.r
    radius = star.radius_R
    inside = _interior(r, radius, layer)
    w = np.where(inside, radial_weights(radius, len(r)) * r**2 * f.rho, 0.0)
    L0 = l * (l + 1)
    dp_r = radial_derivative(fields.dP, radius)
    dphi_r = radial_derivative(fields.dPhi, radius)
    with np.errstate(divide="ignore", invalid="ignore"):
        pressure = np.where(inside, dp_r / f.rho, 0.0)
        buoyant = np.where(inside, f.g * fields.drho / f.rho, 0.0)
        horizontal_force = np.where(inside, (fields.dP / f.rho + fields.dPhi) / r, 0.0)

    def norm(values: np.ndarray) -> float:
        return float(np.sqrt(np.sum(w * np.abs(values) ** 2)))

    res_r = pressure + buoyant + dphi_r - lam * fields.Vr
    res_h = horizontal_force - lam * fields.Vh
    scale = (
        norm(pressure) + norm(buoyant) + norm(dphi_r)
        + abs(lam) * (norm(fields.Vr) + math.sqrt(L0) * norm(fields.Vh))
    )
    return OperatorResidual(
        radial=norm(res_r),
        horizontal=math.sqrt(L0) * norm(res_h),
        scale=max(scale, np.finfo(float).tiny),
    )


def divergence_free_field(
    star: EquilibriumStar,
    l: int,
    bump: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None,
) -> ModeFields:
    """Displacement with drho = 0 built from a compactly supported profile b.

    V^r = b/(rho r^2) and V^h = b'/(l(l+1) rho r), so (r^2 rho V^r)' =
    l(l+1) rho r V^h. With a homentropic star also dP = 0, so the field lies
    in the kernel of the operator.

    Args:
        star: Equilibrium.
        l: Degree >= 1.
        bump: Callable returning (b, b') on the grid; defaults to
            sin^4 supported on [R/4, 3R/4].
    """
    f = star.fields
    r = f.r
    radius = star.radius_R
    if bump is None:
        lo, hi = 0.25 * radius, 0.75 * radius
        inside = (r > lo) & (r < hi)
        phase = np.pi * (r - lo) / (hi - lo)
        b = np.where(inside, np.sin(phase) ** 4, 0.0)
        db = np.where(inside, 4.0 * np.sin(phase) ** 3 * np.cos(phase) * np.pi / (hi - lo), 0.0)
    else:
        b, db = bump(r)
    support = b != 0.0
    vr = np.zeros_like(r)
    vh = np.zeros_like(r)
    vr[support] = b[support] / (f.rho[support] * r[support] ** 2)
    vh[support] = db[support] / (l * (l + 1) * f.rho[support] * r[support])
    return displacement_fields(vr, vh, star, l)


# ---------------------------------------------------------------------------
# Quadratic form and Galerkin probes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticFormTerms:
    kinetic: complex
    buoyancy: complex
    gravity: complex

    @property
    def total(self) -> complex:
        return self.kinetic + self.buoyancy + self.gravity


def u_field(
    vr: np.ndarray,
    vh: np.ndarray,
    star: EquilibriumStar,
    l: int,
    dvr: np.ndarray | None = None,
    form: str = "divergence",
) -> np.ndarray:
    """U = -(1/gamma) r P^(-1/2) dP in divergence form or from dP directly."""
    f = star.fields
    r = f.r
    gamma = star.eos.gamma
    vr = np.asarray(vr)
    vh = np.asarray(vh)
    if dvr is None:
        dvr = radial_derivative(vr, star.radius_R)
    if form == "pressure":
        d_p = displacement_fields(vr, vh, star, l, grav_pert=0.0, dvr=dvr).dP
        with np.errstate(divide="ignore", invalid="ignore"):
            u = -_col(r / (gamma * np.sqrt(f.P)), vr) * d_p
        return np.nan_to_num(u, nan=0.0, posinf=0.0, neginf=0.0)
    if form != "divergence":
        raise ValueError(f"Unknown U form {form!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        root_ratio = np.nan_to_num(np.sqrt(f.rho / (f.omega * f.e)), nan=0.0, posinf=0.0)
    sqrt_p = _col(np.sqrt(f.P), vr)
    return (
        sqrt_p * (2.0 * vr + _col(r, vr) * dvr - l * (l + 1) * vh)
        - _col(r * f.g * root_ratio / gamma, vr) * vr
    )


def _form_matrix_terms(
    star: EquilibriumStar,
    l: int,
    first: tuple[np.ndarray, np.ndarray, np.ndarray],
    second: tuple[np.ndarray, np.ndarray, np.ndarray],
    grav_pert: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    prof = background_profiles(star)
    f = prof.fields
    weights = radial_weights(star.radius_R, len(f.r))
    gamma = star.eos.gamma
    terms = []
    fields = []
    for vr, vh, dvr in (first, second):
        u = u_field(vr, vh, star, l, dvr=dvr)
        drho = displacement_fields(vr, vh, star, l, grav_pert=0.0, dvr=dvr).drho
        fields.append((vr, u, drho))
    (vr1, u1, rho1), (vr2, u2, rho2) = fields
    w = _col(weights, u1)
    kinetic = gamma * (w * u1).T @ np.conj(u2)
    buoyant_w = _col(weights * prof.A * prof.dP * f.r**2, vr1)
    buoyancy = (buoyant_w * vr1).T @ np.conj(vr2)
    if grav_pert > 0.0:
        op = HlOperator.for_star(star, l)
        potential = op.nystrom_matrix @ rho1
        gravity = -4.0 * math.pi * grav_pert * (_col(op.weights, potential) * potential).T @ np.conj(rho2)
    else:
        gravity = np.zeros_like(kinetic)
    terms.extend([kinetic, buoyancy, gravity])
    return tuple(terms)


def quadratic_form_terms(
    V1: tuple[np.ndarray, np.ndarray],
    V2: tuple[np.ndarray, np.ndarray],
    star: EquilibriumStar,
    l: int,
    grav_pert: float | None = None,
) -> QuadraticFormTerms:
    """The three terms of (L V1 | V2) integrated by Clenshaw-Curtis quadrature."""
    gp = star.grav_const if grav_pert is None else grav_pert
    packed = []
    for vr, vh in (V1, V2):
        vr = np.asarray(vr)[:, None]
        vh = np.asarray(vh)[:, None]
        packed.append((vr, vh, radial_derivative(vr, star.radius_R)))
    kinetic, buoyancy, gravity = _form_matrix_terms(star, l, packed[0], packed[1], gp)
    return QuadraticFormTerms(
        kinetic=complex(kinetic[0, 0]), buoyancy=complex(buoyancy[0, 0]), gravity=complex(gravity[0, 0]),
    )


def quadratic_form(
    V1: tuple[np.ndarray, np.ndarray],
    V2: tuple[np.ndarray, np.ndarray],
    star: EquilibriumStar,
    l: int,
    grav_pert: float | None = None,
) -> complex:
    """(L V1 | V2) = gamma int U1 U2* dr + int A P' V1^r V2^r* r^2 dr - 4 pi G int H_l[drho1] drho2* r^2 dr.

    Args:
        V1, V2: (V^r, V^h) pairs on the star grid.
        star: Equilibrium.
        l: Degree.
        grav_pert: Perturbation gravitational constant; 0 drops the last term.

    Returns:
        Complex value of the form.
    """
    return quadratic_form_terms(V1, V2, star, l, grav_pert).total


@dataclass(frozen=True)
class GalerkinOperator:
    """Stiffness Q and mass M of the operator on a Chebyshev basis for V^r and V^h."""

    l: int
    n_basis: int
    Q: np.ndarray = field(repr=False)
    M: np.ndarray = field(repr=False)
    basis_r: np.ndarray = field(repr=False)

    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        return eigh(self.Q, self.M)

    def displacement(self, coefficients: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_basis
        return self.basis_r @ coefficients[:n], self.basis_r @ coefficients[n:]


def galerkin_operator(
    star: EquilibriumStar, l: int, n_basis: int, grav_pert: float | None = None,
) -> GalerkinOperator:
    """Galerkin matrices of the quadratic form on T_k(2r/R - 1), k < n_basis."""
    if n_basis < 1:
        raise DomainError(f"n_basis must be >= 1, got {n_basis}")
    gp = star.grav_const if grav_pert is None else grav_pert
    f = star.fields
    r = f.r
    domain = [0.0, star.radius_R]
    polys = [Chebyshev.basis(k, domain=domain) for k in range(n_basis)]
    values = np.column_stack([poly(r) for poly in polys])
    slopes = np.column_stack([poly.deriv()(r) for poly in polys])
    zeros = np.zeros_like(values)
    vr = np.hstack([values, zeros])
    vh = np.hstack([zeros, values])
    dvr = np.hstack([slopes, zeros])
    kinetic, buoyancy, gravity = _form_matrix_terms(star, l, (vr, vh, dvr), (vr, vh, dvr), gp)
    q = np.real(kinetic + buoyancy + gravity)
    q = 0.5 * (q + q.T)
    w = radial_weights(star.radius_R, len(r)) * r**2 * f.rho
    gram = (values * w[:, None]).T @ values
    mass = np.zeros((2 * n_basis, 2 * n_basis))
    mass[:n_basis, :n_basis] = gram
    mass[n_basis:, n_basis:] = l * (l + 1) * gram
    return GalerkinOperator(l=l, n_basis=n_basis, Q=q, M=mass, basis_r=values)


def kernel_probe(
    star: EquilibriumStar, l: int, resolutions: Sequence[int] = (8, 16),
) -> list[dict[str, float]]:
    """Smallest Galerkin eigenvalues per resolution and their overlap with translation.

    The cosine is taken in the mass inner product against V^r = V^h = 1.
    """
    rows = []
    for n_basis in resolutions:
        op = galerkin_operator(star, l, n_basis)
        values, vectors = op.eigenvalues()
        order = np.argsort(np.abs(values))
        lowest = vectors[:, order[0]]
        translation = np.zeros(2 * n_basis)
        translation[0] = translation[n_basis] = 1.0
        inner = float(lowest @ op.M @ translation)
        cosine = abs(inner) / math.sqrt(float(lowest @ op.M @ lowest) * float(translation @ op.M @ translation))
        scale = float(np.max(np.abs(values)))
        rows.append({
            "n_basis": n_basis,
            "smallest": float(values[order[0]]),
            "second_smallest": float(values[order[1]]) if len(order) > 1 else math.nan,
            "relative_smallest": abs(float(values[order[0]])) / scale,
            "translation_cosine": cosine,
        })
        logger.debug("Kernel probe l=%d n=%d: %s", l, n_basis, rows[-1])
    return rows


# ---------------------------------------------------------------------------
# Fixed points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeResult:
    """One nonradial mode located as a fixed point of the parametrized problem."""

    l: int
    branch: str
    n: int
    lam: float
    x_plus: float
    consistency: float
    roots: tuple[float, ...] = ()
    formulation: str = "gough"
    cowling: bool = False
    condition: ConditionReport | None = None
    fields: ModeFields | None = field(default=None, repr=False)
    flags: tuple[str, ...] = ()

    @property
    def multiplicity(self) -> int:
        return len(self.roots)

    def to_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "l": self.l,
            "branch": self.branch,
            "n": self.n,
            "lambda": self.lam,
            "x_plus": self.x_plus,
            "formulation": self.formulation,
            "cowling": self.cowling,
            "multiplicity": self.multiplicity,
            "consistency": self.consistency,
            "flags": ";".join(self.flags),
        }
        if self.condition is not None:
            report = self.condition
            row.update({
                "delta_G": report.delta_G,
                "delta_B0": report.delta_B0,
                "delta_B1": report.delta_B1,
                "epsilon_B": report.epsilon_B,
            })
        return row


class _ParametrizedSpectrum:
    """Lambda_1..Lambda_n of the parametrized problem, memoized per parameter."""

    def __init__(
        self,
        star: EquilibriumStar,
        l: int,
        branch: str,
        n_max: int,
        cowling: bool,
        tolerances: Tolerances,
    ) -> None:
        self.star = star
        self.l = l
        self.branch = branch
        self.n_max = n_max
        self.cowling = cowling
        self.tolerances = tolerances
        self.profiles = background_profiles(star)
        self._cache: dict[float, np.ndarray] = {}

    def setup(self, param: float) -> NonradialSetup:
        return nonradial_setup(
            self.star, self.l, self.branch, param, self.cowling, self.tolerances, self.profiles,
        )

    def values(self, param: float) -> np.ndarray:
        if param not in self._cache:
            problem = self.setup(param).problem
            slice_ = sl_eigenvalues(problem, self.n_max, self.tolerances, shoot=False)
            self._cache[param] = slice_.eigenvalues
        return self._cache[param]

    def psi(self, param: float, n: int) -> float:
        """param * Lambda_n(param) - 1, zero exactly at a fixed point."""
        return float(param * self.values(param)[n - 1] - 1.0)


def _bracket_roots(
    spectrum: _ParametrizedSpectrum, grid: np.ndarray, n: int, xtol: float,
) -> list[float]:
    values = np.array([spectrum.psi(t, n) for t in grid])
    roots = []
    for k in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0.0):
        root = brentq(
            lambda t: spectrum.psi(t, n), grid[k], grid[k + 1], xtol=xtol * grid[k], rtol=1e-13,
        )
        roots.append(float(root))
    roots.extend(float(t) for t, v in zip(grid, values, strict=True) if v == 0.0)
    if not roots:
        raise NoRootInWindow(
            f"No fixed point for {spectrum.branch}-mode n={n}, l={spectrum.l} in the window",
            l=spectrum.l, n=n, branch=spectrum.branch,
            window=(float(grid[0]), float(grid[-1])),
            phi_lo=float(values[0]), phi_hi=float(values[-1]),
        )
    return sorted(roots)


def _fields_at_fixed_point(
    spectrum: _ParametrizedSpectrum, param: float, n: int, lam: float,
) -> ModeFields:
    star = spectrum.star
    setup = spectrum.setup(param)
    coeffs = setup.coeffs
    values = spectrum.values(param)
    neighbors = (
        float(values[n - 2]) if n > 1 else None,
        float(values[n]) if n < len(values) else None,
    )
    ef = sl_eigenfunction(
        setup.problem, float(values[n - 1]), neighbors=neighbors, tolerances=spectrum.tolerances,
    )
    spline = CubicSpline(
        np.concatenate([[0.0], ef.x, [setup.x_plus]]), np.concatenate([[0.0], ef.y, [0.0]]),
    )
    eta, deta = coeffs.eta_from_y(spline(setup.x), spline(setup.x, 1))
    body = np.isfinite(eta) & np.isfinite(deta)
    eta = np.where(body, eta, 0.0)
    deta = np.where(body, deta, 0.0)

    r = coeffs.r
    if setup.aux.grav_pert > 0.0:
        source = np.where(setup.inside, coeffs.source(eta, deta), 0.0)
        solution = solve_delta_phi(source, star, spectrum.l, lam, setup.aux, spectrum.tolerances)
        x_phi, xdot = solution.X, solution.Xdot
    else:
        x_phi = np.zeros_like(r)
        xdot = np.zeros_like(r)
    prof = spectrum.profiles
    with np.errstate(divide="ignore", invalid="ignore"):
        big_l = spectrum.l * (spectrum.l + 1) / lam
        a20 = prof.rho * (xdot / r + big_l * prof.g_over_r * x_phi / r)
        xi = -(
            coeffs.inv_A21 * (deta + a20)
            + coeffs.inv_A21_L * prof.g_over_r * eta / r
        )
    xi[0] = xi[1] if spectrum.l == 1 else 0.0
    xi[-1] = xi[-2]
    xi = np.nan_to_num(xi, nan=0.0, posinf=0.0, neginf=0.0)
    mode = reconstruct_mode(xi, eta, x_phi, star, spectrum.l, lam)
    mode.diagnostics.update({
        "node_count": float(ef.node_count),
        "eigenfunction_residual": ef.residual,
        "ill_conditioned": float(ef.ill_conditioned),
    })
    return mode


def fixed_point_eigenvalues(
    star: EquilibriumStar,
    l: int,
    branch: str,
    n_range: tuple[int, int],
    cowling: bool = False,
    tolerances: Tolerances | None = None,
    *,
    window: tuple[float, float] | None = None,
    scan_points: int = 24,
    strict: bool = False,
    with_fields: bool = True,
) -> list[ModeResult]:
    """Solve Lambda_n(lambda) = 1/lambda (g) or Lambda^p_n(mu) = 1/mu (p).

    The parameter window is scanned on a log grid (by default
    [1e-6 t0, t0] with t0 = lambda0 or mu0) and every sign change of
    t Lambda_n(t) - 1 is refined with brentq. All roots are reported; the
    one with the smallest lambda is returned as the mode.

    Args:
        star: Admissible equilibrium.
        l: Degree >= 1.
        branch: "g" or "p".
        n_range: Inclusive (first, last) order.
        cowling: Drop the potential perturbation.
        tolerances: Tolerances.
        window: Optional explicit parameter window.
        scan_points: Points of the log scan.
        strict: Raise when the g-branch condition report fails.
        with_fields: Reconstruct eigenfunctions.

    Returns:
        One ModeResult per order.

    Raises:
        GModeAssumptionViolated: For g modes on a star that is not stably
            stratified, or failed conditions in strict mode.
        NoRootInWindow: If some order has no sign change in the window.
    """
    tol = tolerances or Tolerances()
    lo_n, hi_n = n_range
    if lo_n < 1 or hi_n < lo_n:
        raise DomainError(f"Invalid n_range {n_range}")
    flags: list[str] = []
    report = None
    if branch == "g":
        check_gmode_assumption(star)
        top = lambda0_default(star, l, tol.eps_E)
        if not cowling:
            report = check_B_conditions(star, l, top, tol)
            if not report.passed:
                if strict:
                    raise GModeAssumptionViolated(
                        "g-mode smallness conditions fail", **report.to_dict(),
                    )
                logger.warning("g-mode conditions fail for l=%d: %s", l, report.to_dict())
                flags.append("conditions_not_met")
    elif branch == "p":
        top = mu0_default(star, l, tol.eps_E)
    else:
        raise DomainError(f"Unknown nonradial branch {branch!r}")

    lo, hi = window if window is not None else (1e-6 * top, top)
    grid = log_grid(lo, hi, scan_points)
    spectrum = _ParametrizedSpectrum(star, l, branch, hi_n, cowling, tol)

    results = []
    for n in range(lo_n, hi_n + 1):
        roots = _bracket_roots(spectrum, grid, n, xtol=1e-13)
        lams = sorted(t if branch == "g" else 1.0 / t for t in roots)
        lam = lams[0]
        param = lam if branch == "g" else 1.0 / lam
        consistency = abs(spectrum.psi(param, n))
        mode_flags = list(flags)
        if len(roots) > 1:
            mode_flags.append("multiple_roots")
        if consistency > tol.fixed_point:
            mode_flags.append("fixed_point_inexact")
        fields = _fields_at_fixed_point(spectrum, param, n, lam) if with_fields else None
        setup = spectrum.setup(param)
        results.append(ModeResult(
            l=l, branch=branch, n=n, lam=lam, x_plus=setup.x_plus, consistency=consistency,
            roots=tuple(lams), cowling=cowling, condition=report, fields=fields,
            flags=tuple(mode_flags),
        ))
        logger.info("%s-mode l=%d n=%d: lambda=%.10g (%d root(s))", branch, l, n, lam, len(roots))
    return results


def g_mode_envelope(
    star: EquilibriumStar,
    l: int,
    n_max: int,
    tolerances: Tolerances | None = None,
) -> np.ndarray:
    """Upper envelope (1+eps)/((1-eps) Lambda_n(0) - 2 eps K0) of the g eigenvalues.

    Uses the Cowling problem at lambda = 0 and its weight shift K0.
    Non-positive denominators give inf.
    """
    tol = tolerances or Tolerances()
    eps = tol.eps_E
    problem = gmode_problem(star, l, 0.0, cowling=True, tolerances=tol)
    base = sl_eigenvalues(problem, n_max, tol, shoot=False).eigenvalues
    denominator = (1.0 - eps) * base - 2.0 * eps * problem.weight_shift
    with np.errstate(divide="ignore"):
        return np.where(denominator > 0.0, (1.0 + eps) / denominator, np.inf)


def cowling_shift_report(
    star: EquilibriumStar,
    ls: Sequence[int],
    n: int,
    branch: str = "p",
    tolerances: Tolerances | None = None,
) -> list[dict[str, Any]]:
    """Relative eigenvalue change between the Cowling and the full problem per degree."""
    rows = []
    for l in ls:
        full = fixed_point_eigenvalues(star, l, branch, (n, n), False, tolerances, with_fields=False)[0]
        approx = fixed_point_eigenvalues(star, l, branch, (n, n), True, tolerances, with_fields=False)[0]
        shift = abs(approx.lam - full.lam) / abs(full.lam)
        rows.append({
            "l": l,
            "n": n,
            "branch": branch,
            "lambda_full": full.lam,
            "lambda_cowling": approx.lam,
            "relative_shift": shift,
            "scaled_shift": shift * (2 * l + 1),
        })
    return rows
