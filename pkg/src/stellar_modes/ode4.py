"""Four-dimensional first-order formulation of the nonradial problem.

State vector, with eta the Lagrangian pressure perturbation:

    y1 = V^r,  y2 = (dP - rho g V^r)/r = eta/r,  y3 = dPhi/r,  y4 = dPhi'

satisfies r y' = A(r, lambda) y + h(r). Both endpoints are regular
singular points. Fundamental solutions come from Frobenius series there
(in z = r^2 at the center, in s = (R - r)^(1/D) at the surface with
nu = N/D), and eigenvalues are zeros of the connection determinant of the
two admissible pairs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import make_interp_spline
from scipy.linalg import qr
from scipy.optimize import brentq

from stellar_modes.config import Tolerances
from stellar_modes.errors import DomainError, IntegratorError, NuNotRational, ResolventNearPole
from stellar_modes.nonradial import ModeFields, ModeResult, radial_derivative
from stellar_modes.profiles import lambda0_default, mu0_default
from stellar_modes.utils import clustered_radii, log_grid, radial_weights

if TYPE_CHECKING:
    from collections.abc import Sequence

    from stellar_modes.equilibrium import EquilibriumStar

logger = logging.getLogger(__name__)

_FIT_WINDOW = 0.15
_FIT_SAMPLES = 96
_HANDOFF_MAX = 0.075
_HANDOFF_MIN = 1e-3
_R0_DEFAULTS = (0.3, 0.5, 0.7)


# ---------------------------------------------------------------------------
# Coefficient matrix
# ---------------------------------------------------------------------------

def _coefficient_matrix(
    r: np.ndarray,
    rho: np.ndarray,
    drho: np.ndarray,
    g_over_r: np.ndarray,
    c2: np.ndarray,
    l: int,
    lam: float,
    big_g: float,
    grav_pert: float,
    cowling: bool,
) -> np.ndarray:
    L0 = l * (l + 1)
    big_l = L0 / lam
    a = np.zeros(np.shape(r) + (4, 4))
    with np.errstate(divide="ignore", invalid="ignore"):
        a[..., 0, 0] = -2.0 + big_l * g_over_r
        a[..., 0, 1] = (-(r**2) + big_l * c2) / (c2 * rho)
        a[..., 1, 0] = rho * (
            -big_l * g_over_r**2 + 4.0 * g_over_r - 4.0 * math.pi * big_g * rho + lam
        )
        a[..., 1, 1] = -big_l * g_over_r - 1.0
    a[..., 2, 2] = -1.0
    a[..., 2, 3] = 1.0
    a[..., 3, 2] = L0
    a[..., 3, 3] = -2.0
    if not cowling:
        four_pi_g = 4.0 * math.pi * grav_pert
        a[..., 0, 2] = big_l
        a[..., 1, 2] = -big_l * rho * g_over_r
        a[..., 1, 3] = -rho
        with np.errstate(divide="ignore", invalid="ignore"):
            a[..., 3, 0] = -four_pi_g * r * drho
            a[..., 3, 1] = four_pi_g * r**2 / c2
    return a


def assemble_A(
    star: EquilibriumStar,
    l: int,
    lam: float,
    r: np.ndarray | float,
    cowling: bool = False,
) -> np.ndarray:
    """Coefficient matrix A(r, lambda) of r y' = A y at the given radii.

    Args:
        star: Admissible equilibrium.
        l: Degree >= 1.
        lam: Nonzero eigenvalue parameter; L = l(l+1)/lambda.
        r: Radius or radii in (0, R).
        cowling: Drop every coupling to the potential perturbation.

    Returns:
        Array of shape (4, 4) for scalar r, otherwise (len(r), 4, 4).

    Raises:
        DomainError: If lam == 0.
    """
    if lam == 0.0:
        raise DomainError("The 4D system is degenerate at lambda = 0 (L undefined)")
    scalar = np.ndim(r) == 0
    radii = np.atleast_1d(np.asarray(r, dtype=float))
    f = star.fields_at(radii)
    with np.errstate(divide="ignore", invalid="ignore"):
        g_over_r = np.where(radii > 0.0, f.g / radii, star.g_O)
    a = _coefficient_matrix(
        radii, f.rho, f.drho, g_over_r, f.c2, l, lam,
        star.grav_const, star.grav_const, cowling,
    )
    return a[0] if scalar else a


class Ode4System:
    """r y' = A y + h on one star with spline-tabulated background coefficients.

    Evaluating the dense-output equilibrium at every integrator stage is
    slow; the background is tabulated once on a fine clustered grid.
    """

    def __init__(self, star: EquilibriumStar, l: int, cowling: bool = False, nodes: int = 2049) -> None:
        if l < 1:
            raise DomainError(f"The 4D system needs l >= 1, got {l}")
        self.star = star
        self.l = l
        self.cowling = cowling
        self.radius = star.radius_R
        r = clustered_radii(star.radius_R, nodes)
        f = star.fields_at(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            g_over_r = np.where(r > 0.0, f.g / r, star.g_O)
        table = np.column_stack([f.rho, f.drho, g_over_r, f.c2])
        self._background = make_interp_spline(r, table, k=5, axis=0)

    def matrix(self, r: np.ndarray | float, lam: float) -> np.ndarray:
        rho, drho, g_over_r, c2 = np.moveaxis(self._background(r), -1, 0)
        return _coefficient_matrix(
            np.asarray(r, dtype=float), rho, drho, g_over_r, c2, self.l, lam,
            self.star.grav_const, self.star.grav_const, self.cowling,
        )

    def forcing(self, r: np.ndarray, lam: float, f_r: np.ndarray, f_h: np.ndarray) -> np.ndarray:
        """h = (-L f^h, rho (f^r + L g f^h / r), 0, 0) for a force (f^r, f^h)."""
        rho, _, g_over_r, _ = np.moveaxis(self._background(r), -1, 0)
        big_l = self.l * (self.l + 1) / lam
        h = np.zeros(np.shape(r) + (4,))
        h[..., 0] = -big_l * f_h
        h[..., 1] = rho * (f_r + big_l * g_over_r * f_h)
        return h

    def integrate(
        self,
        lam: float,
        y0: np.ndarray,
        r_start: float,
        r_end: float,
        rtol: float,
        t_eval: np.ndarray | None = None,
    ) -> Any:
        """Integrate the homogeneous system for a block of columns.

        Tries DOP853 and falls back to Radau.

        Raises:
            IntegratorError: If both integrators fail.
        """
        shape = y0.shape

        def rhs(r: float, flat: np.ndarray) -> np.ndarray:
            return (self.matrix(r, lam) @ flat.reshape(shape)).ravel() / r

        last = None
        for method in ("DOP853", "Radau"):
            sol = solve_ivp(
                rhs, (r_start, r_end), y0.ravel(), method=method,
                rtol=rtol, atol=1e-14, t_eval=t_eval,
            )
            if sol.success:
                return sol
            last = sol.message
            logger.debug("%s failed on [%g, %g] at lambda=%g: %s", method, r_start, r_end, lam, sol.message)
        raise IntegratorError(
            f"Integration failed on [{r_start:.6g}, {r_end:.6g}]: {last}",
            lam=lam, l=self.l, r_start=r_start, r_end=r_end,
        )


# ---------------------------------------------------------------------------
# Frobenius bases
# ---------------------------------------------------------------------------

def _series_fit(x: np.ndarray, values: np.ndarray, degree: int, scale: float) -> np.ndarray:
    """Coefficient matrices K_k of values ~ sum K_k x^k, fitted in x/scale."""
    flat = values.reshape(len(x), -1)
    coeffs = P.polyfit(x / scale, flat, degree)
    coeffs = coeffs / scale ** np.arange(degree + 1)[:, None]
    return coeffs.reshape((degree + 1,) + values.shape[1:])


@dataclass(frozen=True)
class FrobeniusBasis:
    """Series fundamental solutions at one singular endpoint.

    Center columns are T (sum_m P_m z^m) z^(exponents/2) with z = r^2.
    Surface columns are diag(1, s^N, 1, 1) sum_m Y_m s^(m + exponent) with
    s = (R - r)^(1/D).
    """

    endpoint: str
    l: int
    lam: float
    exponents: np.ndarray
    coefficients: np.ndarray = field(repr=False)
    transform: np.ndarray = field(repr=False)
    leading: dict[str, float]
    validity_radius: float
    radius: float
    cowling: bool = False

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def variable(self) -> str:
        return "z" if self.endpoint == "center" else "s"

    def _local(self, r: np.ndarray) -> np.ndarray:
        if self.endpoint == "center":
            return r
        return (self.radius - r) ** (1.0 / self.leading["D"])

    def columns(self, r: np.ndarray | float, scaled_derivative: bool = False) -> np.ndarray:
        """Basis columns (or r d/dr of them) at radii r, shape (len(r), 4, 4)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        powers = np.arange(self.order + 1)
        if self.endpoint == "center":
            z = r**2
            zm = z[:, None] ** powers[None, :]
            out = np.empty((len(r), 4, 4))
            with np.errstate(divide="ignore", invalid="ignore"):
                for j, e in enumerate(self.exponents):
                    weights = zm if not scaled_derivative else zm * (2.0 * powers + e)[None, :]
                    series = np.einsum("nm,mi->ni", weights, self.coefficients[:, :, j])
                    out[:, :, j] = (series @ self.transform.T) * (r**e)[:, None]
            return out

        big_n = int(self.leading["N"])
        big_d = self.leading["D"]
        s = self._local(r)
        row_powers = np.array([0, big_n, 0, 0])
        out = np.empty((len(r), 4, 4))
        with np.errstate(divide="ignore", invalid="ignore"):
            for j, e in enumerate(self.exponents):
                total = powers[None, :, None] + e + row_powers[None, None, :]
                terms = self.coefficients[None, :, :, j] * s[:, None, None] ** total
                if scaled_derivative:
                    terms = terms * total
                out[:, :, j] = terms.sum(axis=1)
            if scaled_derivative:
                out *= (-r / (big_d * s**big_d))[:, None, None]
        return out

    def admissible(self, r: np.ndarray | float) -> np.ndarray:
        """The two boundary-admissible columns, shape (len(r), 4, 2).

        Center: phi_O1, phi_O2. Surface: phi_R1 and phi_R2 - (l+1) phi_R3.
        """
        cols = self.columns(r)
        if self.endpoint == "center":
            return cols[:, :, :2]
        return np.stack([cols[:, :, 0], cols[:, :, 1] - (self.l + 1) * cols[:, :, 2]], axis=-1)

    def tail(self, r: float) -> float:
        """Relative size of the last two series terms at radius r."""
        x = self._local(np.array([r]))[0]
        if self.endpoint == "center":
            x = x**2
        sizes = [np.max(np.abs(c)) for c in self.coefficients]
        head = max(sizes[0], np.finfo(float).tiny)
        m = self.order
        return float(max(sizes[m - 1] * x ** (m - 1), sizes[m] * x**m) / head)

    def structural_zeros(self) -> dict[str, float]:
        """Series coefficients that vanish by the structure of the basis.

        p41 is the r^-(l+2) component of phi_O1 over the correction terms
        m >= 1, each weighted by its size z^m at the handoff radius. The
        leading term is the identity and carries no information.
        """
        if self.endpoint == "center":
            z = (self.validity_radius or _HANDOFF_MAX * self.radius) ** 2
            terms = np.abs(self.coefficients[1:, 3, 0]) * z ** np.arange(1, self.order + 1)
            return {"p41": float(np.max(terms))}
        big_d = int(self.leading["D"])
        big_n = int(self.leading["N"])
        col = self.coefficients[:, :, 0]
        return {
            "p21": float(np.max(np.abs(col[:big_d, 1]))),
            "p31": float(np.max(np.abs(col[: big_n + big_d, 2]))),
        }


def _choose_handoff(basis: FrobeniusBasis, tol: float) -> float:
    """Largest endpoint distance whose series tail at twice the distance is below tol."""
    radius = basis.radius
    candidates = np.geomspace(_HANDOFF_MIN * radius, _HANDOFF_MAX * radius, 40)
    best = candidates[0]
    for d in candidates:
        probe = 2.0 * d if basis.endpoint == "center" else radius - 2.0 * d
        if basis.tail(probe) <= tol:
            best = d
    if basis.tail(2.0 * best if basis.endpoint == "center" else radius - 2.0 * best) > tol:
        logger.warning("%s series tail above %.1e even at the smallest handoff", basis.endpoint, tol)
    return float(best)


def _center_transform(star: EquilibriumStar, l: int, lam: float, cowling: bool) -> np.ndarray:
    big_l = l * (l + 1) / lam
    rho_o = star.rho_O
    alpha = -rho_o * (big_l * star.g_O - l - 1)
    beta = -rho_o * (big_l * star.g_O + l)
    pot = 0.0 if cowling else -rho_o
    return np.array([
        [big_l, 0.0, big_l, 0.0],
        [alpha, pot, beta, pot],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, float(l), 0.0, -(l + 1.0)],
    ])


def frobenius_center(
    star: EquilibriumStar,
    l: int,
    lam: float,
    order: int = 10,
    cowling: bool = False,
    tolerances: Tolerances | None = None,
) -> FrobeniusBasis:
    """Series solutions at r = 0 in z = r^2.

    The r-exponents are l - 1 (double) and -(l + 2) (double); their half
    difference l + 1/2 is never an integer, so the recursion

        (m + rho_j - rho_i) (P_m)_ij = sum_k (B_k P_(m-k))_ij

    has no small divisors. phi_O1 and phi_O2 are the admissible pair.

    Raises:
        DomainError: If lam == 0 or l < 1.
    """
    if lam == 0.0 or l < 1:
        raise DomainError(f"Center series needs l >= 1 and lambda != 0, got l={l}, lambda={lam}")
    tol = tolerances or Tolerances()
    radius = star.radius_R
    r_fit = np.linspace(0.0, _FIT_WINDOW * radius, _FIT_SAMPLES + 1)[1:]
    a = assemble_A(star, l, lam, r_fit, cowling=cowling)
    z_max = float(r_fit[-1] ** 2)
    k = _series_fit(r_fit**2, a, order, z_max)
    k[0] = _coefficient_matrix(
        0.0, star.rho_O, 0.0, star.g_O, float(star.fields.c2[0]), l, lam,
        star.grav_const, star.grav_const, cowling,
    )

    t = _center_transform(star, l, lam, cowling)
    t_inv = np.linalg.inv(t)
    b = np.einsum("ij,mjk,kl->mil", t_inv, k, t) / 2.0
    exponents = np.array([l - 1.0, l - 1.0, -(l + 2.0), -(l + 2.0)])
    half = exponents / 2.0
    diag_err = float(np.max(np.abs(b[0] - np.diag(half))))
    if diag_err > 1e-8 * max(1.0, float(np.max(np.abs(b[0])))):
        logger.warning("Center leading matrix is not diagonal to %.3g", diag_err)

    coeffs = np.zeros((order + 1, 4, 4))
    coeffs[0] = np.eye(4)
    for m in range(1, order + 1):
        rhs = sum(b[j] @ coeffs[m - j] for j in range(1, m + 1))
        denom = m + half[None, :] - half[:, None]
        coeffs[m] = rhs / denom

    basis = FrobeniusBasis(
        endpoint="center", l=l, lam=lam, exponents=exponents, coefficients=coeffs,
        transform=t, leading={"L": l * (l + 1) / lam, "alpha": t[1, 0], "beta": t[1, 2]},
        validity_radius=0.0, radius=radius, cowling=cowling,
    )
    handoff = _choose_handoff(basis, tol.series_residual)
    logger.debug("Center handoff for l=%d lambda=%.6g at r=%.4g", l, lam, handoff)
    return replace(basis, validity_radius=handoff)


def _surface_matrix(
    star: EquilibriumStar, l: int, lam: float, s: np.ndarray, big_n: int, big_d: int, cowling: bool,
) -> np.ndarray:
    r = star.radius_R - s**big_d
    a = assemble_A(star, l, lam, r, cowling=cowling)
    scale = np.ones((len(s), 4))
    scale[:, 1] = s**big_n
    conj = a * scale[:, None, :] / scale[:, :, None]
    out = -(big_d * s**big_d / r)[:, None, None] * conj
    out[:, 1, 1] -= big_n
    return out


def frobenius_surface(
    star: EquilibriumStar,
    l: int,
    lam: float,
    order: int = 12,
    cowling: bool = False,
    tolerances: Tolerances | None = None,
) -> FrobeniusBasis:
    """Series solutions at r = R in s = (R - r)^(1/D) with y2 = s^N Y2.

    phi_R1, phi_R2, phi_R3 start from e1, e3, e4 at exponent 0; phi_R4 is
    the singular column with exponent -N and leading vector (sigma, -N, 0, 0),
    sigma = D R / (c_R^2 C_rho), truncated before its resonance at m = N.

    Raises:
        NuNotRational: If nu has no rational form with D <= 64.
        DomainError: If lam == 0 or l < 1.
    """
    if lam == 0.0 or l < 1:
        raise DomainError(f"Surface series needs l >= 1 and lambda != 0, got l={l}, lambda={lam}")
    if star.rational_nu is None:
        raise NuNotRational("Surface series need a rational polytropic index", nu=star.nu)
    tol = tolerances or Tolerances()
    big_n, big_d = star.rational_nu
    radius = star.radius_R
    s_max = (_FIT_WINDOW * radius) ** (1.0 / big_d)
    s_fit = np.linspace(0.0, s_max, _FIT_SAMPLES + 1)[1:]
    k = _series_fit(s_fit, _surface_matrix(star, l, lam, s_fit, big_n, big_d, cowling), order, s_max)
    sigma = big_d * radius / (star.c_R_sq * star.C_rho)
    k0 = np.zeros((4, 4))
    k0[0, 1] = sigma
    k0[1, 1] = -big_n
    k[0] = k0

    coeffs = np.zeros((order + 1, 4, 4))
    starts = {0: np.eye(4)[0], 1: np.eye(4)[2], 2: np.eye(4)[3]}
    for j, y0 in starts.items():
        coeffs[0, :, j] = y0
        for m in range(1, order + 1):
            rhs = sum(k[q] @ coeffs[m - q, :, j] for q in range(1, m + 1))
            coeffs[m, :, j] = np.linalg.solve(m * np.eye(4) - k0, rhs)
    coeffs[0, :, 3] = [sigma, -big_n, 0.0, 0.0]
    for m in range(1, min(order, big_n - 1) + 1):
        rhs = sum(k[q] @ coeffs[m - q, :, 3] for q in range(1, m + 1))
        coeffs[m, :, 3] = np.linalg.solve((m - big_n) * np.eye(4) - k0, rhs)

    basis = FrobeniusBasis(
        endpoint="surface", l=l, lam=lam,
        exponents=np.array([0.0, 0.0, 0.0, -float(big_n)]),
        coefficients=coeffs, transform=np.diag([1.0, 0.0, 1.0, 1.0]),
        leading={"sigma": sigma, "N": float(big_n), "D": float(big_d)},
        validity_radius=0.0, radius=radius, cowling=cowling,
    )
    regular = replace(basis, coefficients=coeffs[:, :, :3])
    handoff = _choose_handoff(regular, tol.series_residual)
    logger.debug("Surface handoff for l=%d lambda=%.6g at R-r=%.4g", l, lam, handoff)
    return replace(basis, validity_radius=handoff)


def series_residual(basis: FrobeniusBasis, star: EquilibriumStar, r: np.ndarray) -> float:
    """Relative max of |r y' - A y| over the regular columns at radii r."""
    r = np.asarray(r, dtype=float)
    a = assemble_A(star, basis.l, basis.lam, r, cowling=basis.cowling)
    cols = basis.columns(r)
    dcols = basis.columns(r, scaled_derivative=True)
    keep = [0, 1] if basis.endpoint == "center" else [0, 1, 2]
    lhs = dcols[:, :, keep]
    rhs = (a @ cols)[:, :, keep]
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))), np.finfo(float).tiny)
    return float(np.max(np.abs(lhs - rhs)) / scale)


# ---------------------------------------------------------------------------
# Connection determinant
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectionResult:
    """D(r0, lambda) = det[phi_O1, phi_O2, phi_R1, phi_R2 - (l+1) phi_R3] r0^6."""

    r0: float
    lam: float
    determinant: float
    log_abs: float
    columns: np.ndarray = field(repr=False)
    condition: float = math.nan
    spread: float = math.nan
    handoff: tuple[float, float] = (math.nan, math.nan)
    values_at: dict[float, float] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "r0": self.r0,
            "lambda": self.lam,
            "determinant": self.determinant,
            "log_abs": self.log_abs,
            "condition": self.condition,
            "spread": self.spread,
            "r_in": self.handoff[0],
            "r_out": self.handoff[1],
        }


@dataclass
class _Sweep:
    """Orthonormalized column block at breakpoints with accumulated scale."""

    q: dict[float, np.ndarray] = field(default_factory=dict)
    log_abs: dict[float, float] = field(default_factory=dict)
    sign: dict[float, float] = field(default_factory=dict)


def _sweep(
    system: Ode4System, lam: float, y0: np.ndarray, r_start: float, stops: Sequence[float], rtol: float,
) -> _Sweep:
    out = _Sweep()
    block = y0 / np.linalg.norm(y0, axis=0)
    log_abs, sign = 0.0, 1.0
    r = r_start
    for stop in stops:
        sol = system.integrate(lam, block, r, stop, rtol)
        block = sol.y[:, -1].reshape(block.shape)
        q, upper = qr(block, mode="economic")
        det = float(np.linalg.det(upper))
        log_abs += math.log(abs(det)) if det != 0.0 else -math.inf
        sign *= math.copysign(1.0, det)
        block = q
        out.q[stop] = q
        out.log_abs[stop] = log_abs
        out.sign[stop] = sign
        r = stop
    return out


def eigen_determinant(
    star: EquilibriumStar,
    l: int,
    lam: float,
    r0: float | None = None,
    tolerances: Tolerances | None = None,
    cowling: bool = False,
    system: Ode4System | None = None,
) -> ConnectionResult:
    """Connection determinant at r0 with its spread over r0 in {0.3, 0.5, 0.7} R.

    The admissible center pair is integrated outward from the series
    handoff and the admissible surface pair inward, each with QR
    re-orthonormalization at the breakpoints. Start columns are normalized
    to unit length and the accumulated triangular determinants are carried,
    so D r0^6 is independent of r0.

    Args:
        star: Admissible equilibrium with rational nu.
        l: Degree >= 1.
        lam: Nonzero eigenvalue parameter.
        r0: Matching radius in (0.2R, 0.8R); defaults to 0.5R.
        tolerances: Tolerances; uses integrator_rtol and series_residual.
        cowling: Drop the potential coupling.
        system: Reusable tabulated system.

    Returns:
        ConnectionResult.

    Raises:
        DomainError: If lam == 0 or r0 is outside (0.2R, 0.8R).
        IntegratorError: If the integration fails.
    """
    if lam == 0.0:
        raise DomainError("Connection determinant is undefined at lambda = 0")
    tol = tolerances or Tolerances()
    radius = star.radius_R
    r0 = 0.5 * radius if r0 is None else float(r0)
    if not 0.2 * radius < r0 < 0.8 * radius:
        raise DomainError(f"r0 must lie in (0.2R, 0.8R), got {r0}")
    system = system or Ode4System(star, l, cowling)
    center = frobenius_center(star, l, lam, cowling=cowling, tolerances=tol)
    surface = frobenius_surface(star, l, lam, cowling=cowling, tolerances=tol)
    r_in = center.validity_radius
    r_out = radius - surface.validity_radius

    points = sorted({f * radius for f in _R0_DEFAULTS} | {r0})
    rtol = max(tol.integrator_rtol, 1e-13)
    outward = _sweep(system, lam, center.admissible(r_in)[0], r_in, points, rtol)
    inward = _sweep(system, lam, surface.admissible(r_out)[0], r_out, points[::-1], rtol)

    values: dict[float, float] = {}
    logs: dict[float, float] = {}
    mats: dict[float, np.ndarray] = {}
    for point in points:
        mat = np.hstack([outward.q[point], inward.q[point]])
        det = float(np.linalg.det(mat))
        sign = outward.sign[point] * inward.sign[point] * math.copysign(1.0, det)
        log_abs = (
            outward.log_abs[point] + inward.log_abs[point]
            + (math.log(abs(det)) if det != 0.0 else -math.inf) + 6.0 * math.log(point)
        )
        logs[point] = log_abs
        values[point] = sign * math.exp(min(log_abs, 700.0))
        mats[point] = mat

    probes = [values[f * radius] for f in _R0_DEFAULTS]
    scale = max(abs(v) for v in probes)
    spread = (max(probes) - min(probes)) / scale if scale > 0.0 else 0.0
    result = ConnectionResult(
        r0=r0, lam=lam, determinant=values[r0], log_abs=logs[r0], columns=mats[r0],
        condition=float(np.linalg.cond(mats[r0])), spread=float(spread),
        handoff=(r_in, r_out), values_at=values,
    )
    logger.debug("D(r0=%.3g, lambda=%.8g) = %.6g (spread %.2e)", r0, lam, result.determinant, spread)
    return result


def normalized_determinant(result: ConnectionResult) -> float:
    """det of the unit-column connection matrix; zero exactly at eigenvalues."""
    return float(np.linalg.det(result.columns))


@dataclass(frozen=True)
class ScanRoot:
    lam: float
    residual: float
    reference: float | None = None
    relative_delta: float | None = None
    matched: bool | None = None


def scan_curve(
    star: EquilibriumStar,
    l: int,
    window: tuple[float, float],
    n_points: int = 40,
    r0: float | None = None,
    tolerances: Tolerances | None = None,
    cowling: bool = False,
) -> list[dict[str, float]]:
    """Rows (lambda, D, spread) of the determinant over a window, for plotting."""
    grid = _scan_grid(window, n_points)
    system = Ode4System(star, l, cowling)
    rows = []
    for lam in grid:
        res = eigen_determinant(star, l, float(lam), r0, tolerances, cowling, system)
        rows.append({"lambda": float(lam), "D": res.determinant, "spread": res.spread})
    return rows


def _scan_grid(window: tuple[float, float], n_points: int) -> np.ndarray:
    lo, hi = window
    if lo <= 0.0 <= hi:
        raise DomainError(f"Scan window must exclude 0, got {window}")
    if hi <= lo:
        raise DomainError(f"Empty scan window {window}")
    if lo > 0.0 and hi / lo > 10.0:
        return log_grid(lo, hi, n_points)
    return np.linspace(lo, hi, n_points)


def scan_eigenvalues(
    star: EquilibriumStar,
    l: int,
    window: tuple[float, float],
    n_points: int = 40,
    r0: float | None = None,
    tolerances: Tolerances | None = None,
    cowling: bool = False,
    references: Sequence[float] | None = None,
) -> list[ScanRoot]:
    """Real zeros of lambda -> D(r0, lambda) in a window.

    Sign changes on the scan grid are refined with brentq. When reference
    eigenvalues (e.g. from the reduced formulation) are given, each root is
    tagged with its nearest reference and the relative difference.

    Returns:
        Roots in ascending order; possibly empty.
    """
    tol = tolerances or Tolerances()
    grid = _scan_grid(window, n_points)
    system = Ode4System(star, l, cowling)

    def det(lam: float) -> float:
        return eigen_determinant(star, l, lam, r0, tol, cowling, system).determinant

    values = np.array([det(float(lam)) for lam in grid])
    scale = float(np.max(np.abs(values))) or 1.0
    roots = []
    for k in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0.0):
        lam = float(brentq(det, grid[k], grid[k + 1], xtol=1e-14 * abs(grid[k]), rtol=1e-12))
        ref = delta = matched = None
        if references:
            ref = float(min(references, key=lambda v: abs(v - lam)))
            delta = abs(lam - ref) / abs(ref)
            matched = delta <= tol.cross_formulation
        roots.append(ScanRoot(lam=lam, residual=abs(det(lam)) / scale, reference=ref,
                              relative_delta=delta, matched=matched))
    logger.info("Determinant scan l=%d on [%g, %g]: %d root(s)", l, grid[0], grid[-1], len(roots))
    return roots


def ode4_modes(
    star: EquilibriumStar,
    l: int,
    branch: str,
    n_range: tuple[int, int],
    cowling: bool = False,
    tolerances: Tolerances | None = None,
    references: Sequence[float] | None = None,
    n_points: int = 160,
) -> list[ModeResult]:
    """Modes of one branch from a determinant scan, ordered like the reduced formulation.

    g roots are taken below lambda0 and counted downward from the largest;
    p roots are taken above 1/mu0 and counted upward. References, when
    given, hold one eigenvalue per order starting at n_range[0]; the scan is
    then restricted to a window around them and each order takes the root
    nearest its own reference.
    """
    tol = tolerances or Tolerances()
    lo_n, hi_n = n_range
    if references:
        lo = 0.8 * min(references)
        hi = 1.2 * max(references)
    elif branch == "g":
        top = lambda0_default(star, l, tol.eps_E)
        lo, hi = 1e-4 * top, top
    elif branch == "p":
        lo = 1.0 / mu0_default(star, l, tol.eps_E)
        hi = lo * (hi_n + 3) ** 2
    else:
        raise DomainError(f"Unknown nonradial branch {branch!r}")
    roots = scan_eigenvalues(star, l, (lo, hi), n_points, None, tol, cowling, references)
    lams = [root.lam for root in roots]
    if branch == "g":
        top = lambda0_default(star, l, tol.eps_E)
        lams = sorted((v for v in lams if 0.0 < v <= top), reverse=True)
    else:
        floor = 1.0 / mu0_default(star, l, tol.eps_E)
        lams = sorted(v for v in lams if v >= floor)
    by_lam = {root.lam: root for root in roots}
    # A reference window drops the orders below lo_n, so roots are matched to
    # the references of their own order instead of being counted.
    refs = list(references or [])
    results = []
    for n in range(lo_n, hi_n + 1):
        k = n - lo_n
        if refs:
            if k >= len(refs) or not lams:
                logger.warning("No reference for l=%d %s%d; stopping the determinant match", l, branch, n)
                break
            lam = min(lams, key=lambda v: abs(v - refs[k]))
            mismatch = abs(lam - refs[k]) > tol.cross_formulation * abs(refs[k])
        else:
            if n > len(lams):
                logger.warning("Determinant scan found only %d %s-root(s) for l=%d", len(lams), branch, l)
                break
            lam = lams[n - 1]
            mismatch = False
        results.append(ModeResult(
            l=l, branch=branch, n=n, lam=lam, x_plus=math.nan, consistency=by_lam[lam].residual,
            roots=(lam,), formulation="ode4", cowling=cowling,
            flags=("cross_formulation_mismatch",) if mismatch else (),
        ))
    return results


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def series_overlap(
    star: EquilibriumStar,
    l: int,
    lam: float,
    cowling: bool = False,
    tolerances: Tolerances | None = None,
) -> dict[str, float]:
    """Relative mismatch between series and integration on [d, 2d] at both ends."""
    tol = tolerances or Tolerances()
    system = Ode4System(star, l, cowling)
    radius = star.radius_R
    out = {}
    center = frobenius_center(star, l, lam, cowling=cowling, tolerances=tol)
    d = center.validity_radius
    start = center.admissible(d)[0]
    sol = system.integrate(lam, start, d, 2.0 * d, tol.integrator_rtol)
    end = sol.y[:, -1].reshape(start.shape)
    expected = center.admissible(2.0 * d)[0]
    out["center"] = float(np.max(np.abs(end - expected)) / np.max(np.abs(expected)))

    surface = frobenius_surface(star, l, lam, cowling=cowling, tolerances=tol)
    d = surface.validity_radius
    start = surface.admissible(radius - d)[0]
    sol = system.integrate(lam, start, radius - d, radius - 2.0 * d, tol.integrator_rtol)
    end = sol.y[:, -1].reshape(start.shape)
    expected = surface.admissible(radius - 2.0 * d)[0]
    out["surface"] = float(np.max(np.abs(end - expected)) / np.max(np.abs(expected)))
    return out


def fundamental_determinant_drift(
    star: EquilibriumStar,
    l: int,
    lam: float,
    span: tuple[float, float] = (0.3, 0.7),
    cowling: bool = False,
    tolerances: Tolerances | None = None,
) -> float:
    """Relative deviation of det Phi(r2)/det Phi(r1) from (r1/r2)^6 (trace A = -6)."""
    tol = tolerances or Tolerances()
    system = Ode4System(star, l, cowling)
    r1, r2 = span[0] * star.radius_R, span[1] * star.radius_R
    sol = system.integrate(lam, np.eye(4), r1, r2, tol.integrator_rtol)
    phi = sol.y[:, -1].reshape(4, 4)
    expected = (r1 / r2) ** 6
    return float(abs(np.linalg.det(phi) - expected) / expected)


def boundary_filter_diagnostics(r: np.ndarray, y: np.ndarray, star: EquilibriumStar, l: int) -> dict[str, Any]:
    """Center integrability and surface potential condition of a sampled solution.

    Args:
        r: Increasing radii covering both ends.
        y: State samples of shape (len(r), 4).
        star: Equilibrium.
        l: Degree.

    Returns:
        Dict with the fitted center exponent, the normalized surface value
        |(l+1) y3 + y4| at the outermost sample and pass flags.
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    radius = star.radius_R
    inner = (r > 0.0) & (r <= 0.02 * radius)
    size = np.max(np.abs(y[inner]), axis=1)
    exponent = float(np.polyfit(np.log(r[inner]), np.log(size), 1)[0]) if np.count_nonzero(inner) >= 3 else math.nan
    last = y[-1]
    denom = max(abs(last[2]), abs(last[3]), np.finfo(float).tiny)
    surface_value = abs((l + 1) * last[2] + last[3]) / denom
    return {
        "center_exponent": exponent,
        "center_ok": bool(exponent > -1.5),
        "surface_value": float(surface_value),
        "surface_ok": bool(surface_value <= 1e-6),
    }


# ---------------------------------------------------------------------------
# Inhomogeneous problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InhomogeneousSolution:
    """Solution of (L - lambda) V = f on the star grid with its state vector."""

    lam: float
    r: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    fields: ModeFields = field(repr=False)
    k_center: np.ndarray = field(repr=False)
    k_surface: np.ndarray = field(repr=False)
    handoff: tuple[float, float] = (math.nan, math.nan)
    big_n: int = 1
    big_d: int = 1


def solve_inhomogeneous(
    star: EquilibriumStar,
    l: int,
    lam: float,
    forcing: tuple[np.ndarray, np.ndarray],
    tolerances: Tolerances | None = None,
    cowling: bool = False,
    eigenvalues: Sequence[float] | None = None,
    refine: int = 4,
) -> InhomogeneousSolution:
    """Variation of parameters for r y' = A y + h with admissible behaviour at both ends.

    With Phi = [center pair, surface pair], y = Phi_c U + Phi_s V where the
    center coefficients U = -int_r^R (Phi^-1 h / r)_c are integrated from
    the surface inward and V = int_0^r (Phi^-1 h / r)_s from the center
    outward. V^h = (y2/rho + g y1/r + y3 - f^h)/lambda.

    Args:
        star: Equilibrium with rational nu.
        l: Degree >= 1.
        lam: Parameter off the spectrum.
        forcing: (f^r, f^h) sampled on the star grid.
        tolerances: Tolerances; uses resolvent and integrator_rtol.
        cowling: Drop the potential coupling.
        eigenvalues: Known eigenvalues; lam closer than tol.resolvent
            (relative) to one of them is rejected.
        refine: Sub-intervals per grid interval for the coefficient
            quadrature; fields are returned on the star grid only.

    Returns:
        InhomogeneousSolution with fields on the whole star grid.

    Raises:
        ResolventNearPole: If lam sits on or next to an eigenvalue.
    """
    if lam == 0.0:
        raise DomainError("Resolvent solve needs lambda != 0")
    tol = tolerances or Tolerances()
    for ev in eigenvalues or ():
        if abs(lam - ev) <= tol.resolvent * abs(ev):
            raise ResolventNearPole("lambda is within the eigenvalue bracket", lam=lam, eigenvalue=ev)

    radius = star.radius_R
    grid = star.grid_r
    f_r, f_h = (np.asarray(v, dtype=float) for v in forcing)
    system = Ode4System(star, l, cowling)
    center = frobenius_center(star, l, lam, cowling=cowling, tolerances=tol)
    surface = frobenius_surface(star, l, lam, cowling=cowling, tolerances=tol)
    r_in = center.validity_radius
    r_out = radius - surface.validity_radius
    body = (grid > r_in) & (grid < r_out)
    coarse = np.concatenate([[r_in], grid[body], [r_out]])
    step = max(int(refine), 1)
    r_eval = np.interp(np.arange((len(coarse) - 1) * step + 1) / step, np.arange(len(coarse)), coarse)

    c0 = center.admissible(r_in)[0]
    s0 = surface.admissible(r_out)[0]
    c_scale = np.linalg.norm(c0, axis=0)
    s_scale = np.linalg.norm(s0, axis=0)
    rtol = tol.integrator_rtol
    sol_c = system.integrate(lam, c0 / c_scale, r_in, r_out, rtol, t_eval=r_eval)
    sol_s = system.integrate(lam, s0 / s_scale, r_out, r_in, rtol, t_eval=r_eval[::-1])
    phi_c = sol_c.y.T.reshape(-1, 4, 2)
    phi_s = sol_s.y.T.reshape(-1, 4, 2)[::-1]
    phi = np.concatenate([phi_c, phi_s], axis=2)

    mid = len(r_eval) // 2
    unit = phi[mid] / np.linalg.norm(phi[mid], axis=0)
    if abs(np.linalg.det(unit)) < tol.resolvent:
        raise ResolventNearPole(
            "Connection matrix is singular to tolerance", lam=lam, det=float(np.linalg.det(unit)),
        )

    spline_f = make_interp_spline(grid, np.column_stack([f_r, f_h]), k=3, axis=0)
    fr_eval, fh_eval = spline_f(r_eval).T
    h = system.forcing(r_eval, lam, fr_eval, fh_eval)
    w = np.linalg.solve(phi, (h / r_eval[:, None])[..., None])[..., 0]
    outward = cumulative_simpson(w[:, 2:], x=r_eval, axis=0, initial=0.0)
    total = cumulative_simpson(w[:, :2], x=r_eval, axis=0, initial=0.0)
    inward = -(total[-1] - total)
    y_body = np.einsum("nij,nj->ni", phi_c, inward) + np.einsum("nij,nj->ni", phi_s, outward)

    y = np.zeros((len(grid), 4))
    y[body] = y_body[step:-step:step]
    near_c = grid <= r_in
    near_s = grid >= r_out
    y[near_c] = np.einsum("nij,j->ni", center.admissible(grid[near_c]) / c_scale, inward[0])
    y[near_s] = np.einsum("nij,j->ni", surface.admissible(grid[near_s]) / s_scale, outward[-1])

    fields = _state_fields(star, l, lam, y, f_h)
    big_n, big_d = star.rational_nu or (1, 1)
    return InhomogeneousSolution(
        lam=lam, r=r_eval, y=y, fields=fields, k_center=inward, k_surface=outward,
        handoff=(r_in, r_out), big_n=big_n, big_d=big_d,
    )


def _state_fields(star: EquilibriumStar, l: int, lam: float, y: np.ndarray, f_h: np.ndarray) -> ModeFields:
    f = star.fields
    r = f.r
    y1, y2, y3, _ = y.T
    with np.errstate(divide="ignore", invalid="ignore"):
        g_over_r = np.where(r > 0.0, f.g / r, star.g_O)
        pressure_term = y2 / f.rho
        drho = -f.drho * y1 + r * y2 / f.c2
    pressure_term[-1] = pressure_term[-2]
    drho[-1] = drho[-2]
    vh = (pressure_term + g_over_r * y1 + y3 - f_h) / lam
    return ModeFields(
        r=r, Vr=y1, Vh=vh, drho=drho, dP=r * y2 + f.rho * f.g * y1, dPhi=r * y3, eta=r * y2,
    )


def resolvent_residual(
    solution: InhomogeneousSolution,
    star: EquilibriumStar,
    l: int,
    forcing: tuple[np.ndarray, np.ndarray],
    layer: float = 0.1,
) -> float:
    """Relative weighted L^2 norm of (L - lambda) V - f away from the endpoints."""
    f = star.fields
    r = f.r
    radius = star.radius_R
    lam = solution.lam
    fields = solution.fields
    f_r, f_h = (np.asarray(v, dtype=float) for v in forcing)
    inside = (r > layer * radius) & (r < (1.0 - layer) * radius)
    w = np.where(inside, radial_weights(radius, len(r)) * r**2 * f.rho, 0.0)
    dp_r = radial_derivative(fields.dP, radius)
    dphi_r = radial_derivative(fields.dPhi, radius)
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where(inside, dp_r / f.rho + f.g * fields.drho / f.rho + dphi_r - lam * fields.Vr - f_r, 0.0)
        horizontal = np.where(inside, (fields.dP / f.rho + fields.dPhi) / r - lam * fields.Vh - f_h, 0.0)
    L0 = l * (l + 1)
    residual = math.sqrt(float(np.sum(w * (radial**2 + L0 * horizontal**2))))
    scale = math.sqrt(float(np.sum(w * (f_r**2 + L0 * f_h**2))))
    scale += abs(lam) * math.sqrt(float(np.sum(w * (fields.Vr**2 + L0 * fields.Vh**2))))
    return residual / max(scale, np.finfo(float).tiny)


def _bump_tests(r: np.ndarray, a: float, b: float, count: int) -> tuple[np.ndarray, np.ndarray]:
    """sin^6 bumps times cos(k pi t) on (a, b), with their r-derivatives."""
    t = np.clip((r - a) / (b - a), 0.0, 1.0)
    inside = (r > a) & (r < b)
    s, c = np.sin(np.pi * t), np.cos(np.pi * t)
    values, slopes = [], []
    for k in range(count):
        ck, sk = np.cos(k * np.pi * t), np.sin(k * np.pi * t)
        values.append(np.where(inside, s**6 * ck, 0.0))
        slopes.append(np.where(inside, np.pi * (6.0 * s**5 * c * ck - k * s**6 * sk) / (b - a), 0.0))
    return np.array(values), np.array(slopes)


def weak_resolvent_residual(
    solution: InhomogeneousSolution,
    star: EquilibriumStar,
    l: int,
    forcing: tuple[np.ndarray, np.ndarray],
    layer: float = 0.1,
    tests: int = 6,
) -> float:
    """Relative residual of (L - lambda) V = f against smooth bumps inside the star.

    The derivatives of dP and dPhi are moved onto the test functions, so no
    numerical differentiation of the solution enters. Each bump is used for
    both components; the result is the ratio of the residual pairings to the
    same pairings of f and lambda V.
    """
    f = star.fields
    r = f.r
    radius = star.radius_R
    lam = solution.lam
    fields = solution.fields
    inside = (r > layer * radius) & (r < (1.0 - layer) * radius)
    f_r, f_h = (np.asarray(v, dtype=float)[inside] for v in forcing)
    weights = radial_weights(radius, len(r))[inside]
    rho, drho_eq, g = f.rho[inside], f.drho[inside], f.g[inside]
    vr, vh, drho = fields.Vr[inside], fields.Vh[inside], fields.drho[inside]
    dphi = fields.dPhi[inside]
    r = r[inside]
    test, slope = _bump_tests(r, layer * radius, (1.0 - layer) * radius, tests)
    r2 = r**2
    pressure = fields.dP[inside] + rho * dphi

    def pair(values: np.ndarray) -> np.ndarray:
        return (test * values) @ weights

    radial = (
        -(slope * r2 + 2.0 * test * r) * pressure @ weights
        + pair(-dphi * drho_eq * r2 + g * drho * r2 - (lam * vr + f_r) * rho * r2)
    )
    horizontal = pair(pressure * r - (lam * vh + f_h) * rho * r2)
    L0 = l * (l + 1)
    residual = math.sqrt(float(np.sum(radial**2 + L0 * horizontal**2)))
    scale = math.sqrt(float(np.sum(pair(f_r * rho * r2) ** 2 + L0 * pair(f_h * rho * r2) ** 2)))
    scale += abs(lam) * math.sqrt(
        float(np.sum(pair(vr * rho * r2) ** 2 + L0 * pair(vh * rho * r2) ** 2))
    )
    return residual / max(scale, np.finfo(float).tiny)


def decay_exponent(solution: InhomogeneousSolution, radius: float, window: float = 0.1) -> float:
    """Log-log slope of |K_c| against s = (R - r)^(1/D) next to the surface."""
    r = solution.r
    gap = radius - r
    r_out = solution.handoff[1]
    near = (gap <= window * radius) & (gap >= 5.0 * (radius - r_out))
    size = np.linalg.norm(solution.k_center, axis=1)
    keep = near & (size > 0.0)
    if np.count_nonzero(keep) < 3:
        return math.nan
    s = gap[keep] ** (1.0 / solution.big_d)
    return float(np.polyfit(np.log(s), np.log(size[keep]), 1)[0])
