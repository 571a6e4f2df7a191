"""Derived background fields and the lambda-dependent reduction factors.

Every scale height 1/H[Q] = -d(log Q)/dr is assembled from analytic
log-derivatives of the component fields, never by differencing Q.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import brentq

from stellar_modes.errors import DomainError, LambdaTooLarge, MuTooLarge
from stellar_modes.utils import cumulative_radial, parse_product

if TYPE_CHECKING:
    from stellar_modes.equilibrium import EquilibriumStar, Fields

logger = logging.getLogger(__name__)

# Leading exponents (center, surface) of the named fields, used for the
# endpoint limits of 1/H[Q].
_ENDPOINT_EXPONENTS = {
    "r": (1.0, 0.0),
    "rho": (0.0, None),
    "P": (0.0, None),
    "omega": (0.0, 1.0),
    "c2": (0.0, 1.0),
    "g": (1.0, 0.0),
    "mean_rho": (0.0, 0.0),
    "N2": (2.0, 0.0),
    "E": (0.0, 0.0),
    "Ep": (0.0, 0.0),
    "W": (-1.0, None),
}


@dataclass(frozen=True)
class Profiles:
    """Background fields sampled on the star grid with endpoint limits filled."""

    star: EquilibriumStar
    fields: Fields
    r: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    P: np.ndarray
    dP: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    g_over_r: np.ndarray
    c2: np.ndarray
    mean_rho: np.ndarray
    A: np.ndarray
    N2: np.ndarray
    dN2: np.ndarray

    def inv_scale_height(self, expression: str, aux: GoughAux | PModeAux | None = None) -> np.ndarray:
        return scale_height_inv(self, expression, aux=aux)


@dataclass(frozen=True)
class GoughAux:
    """Factors of the g-mode reduction at fixed (l, lambda)."""

    lam: float
    l: int
    L0: int
    grav_pert: float
    r: np.ndarray
    t: np.ndarray
    dt: np.ndarray
    E: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    dE1: np.ndarray
    dE2: np.ndarray
    dE: np.ndarray
    frakN2: np.ndarray
    frakQ: np.ndarray
    W: np.ndarray
    dlogW: np.ndarray
    Sl2: np.ndarray
    kappa: np.ndarray

    @property
    def min_E(self) -> float:
        return float(np.min(self.E))


@dataclass(frozen=True)
class PModeAux:
    """Factors of the p-mode reduction at fixed (l, mu = 1/lambda)."""

    mu: float
    l: int
    L0: int
    grav_pert: float
    r: np.ndarray
    Ep: np.ndarray
    Ep1: np.ndarray
    Ep2: np.ndarray
    dEp: np.ndarray
    Wp: np.ndarray
    kappap: np.ndarray
    frakN2p: np.ndarray

    @property
    def min_Ep(self) -> float:
        return float(np.min(self.Ep))


def mean_density(star: EquilibriumStar) -> np.ndarray:
    """Mean density 3m(r)/(4 pi r^3) on the star grid, rho_O at the center.

    Satisfies g = (4 pi / 3) G <rho> r and <rho> <= rho_O for decreasing rho.
    """
    f = star.fields
    g_over_r = _g_over_r(star, f)
    return 3.0 * g_over_r / (4.0 * np.pi * star.grav_const)


def lamb_frequency_sq(star: EquilibriumStar, l: int) -> np.ndarray:
    """S_l^2 = l(l+1) c^2 / r^2 on the star grid (infinite at the center)."""
    f = star.fields
    with np.errstate(divide="ignore"):
        return l * (l + 1) * f.c2 / f.r**2


def background_profiles(star: EquilibriumStar) -> Profiles:
    """Sample c^2, g, <rho>, A and N^2 on the star grid.

    Args:
        star: Admissible equilibrium.

    Returns:
        Profiles with A = -S'/(gamma C_V) and N2 = g S'/(gamma C_V).
    """
    f = star.fields
    gc = star.eos.gamma * star.eos.c_v
    g_over_r = _g_over_r(star, f)
    schwarzschild = -f.dS / gc
    brunt = f.g * f.dS / gc
    dbrunt = (f.dg * f.dS + f.g * f.ddS) / gc
    return Profiles(
        star=star,
        fields=f,
        r=f.r,
        rho=f.rho,
        drho=f.drho,
        P=f.P,
        dP=f.dP,
        g=f.g,
        dg=f.dg,
        g_over_r=g_over_r,
        c2=f.c2,
        mean_rho=3.0 * g_over_r / (4.0 * np.pi * star.grav_const),
        A=schwarzschild,
        N2=brunt,
        dN2=dbrunt,
    )


def _g_over_r(star: EquilibriumStar, f: Fields) -> np.ndarray:
    out = np.empty_like(f.r)
    center = f.r <= 0.0
    out[~center] = f.g[~center] / f.r[~center]
    out[center] = star.g_O
    return out


def g_over_r_derivative(profiles: Profiles) -> np.ndarray:
    """(g/r)' = (4 pi G rho - 3 g/r)/r; g/r is even in r, so this is 0 at the center."""
    r = profiles.r
    out = np.zeros_like(r)
    body = r > 0.0
    big_g = profiles.star.grav_const
    out[body] = (4.0 * np.pi * big_g * profiles.rho[body] - 3.0 * profiles.g_over_r[body]) / r[body]
    return out


# ---------------------------------------------------------------------------
# Scale heights
# ---------------------------------------------------------------------------

def _component_log_derivatives(
    profiles: Profiles, aux: GoughAux | PModeAux | None,
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    f = profiles.fields
    r = profiles.r
    big_g = profiles.star.grav_const
    s_prime = profiles.star.eos.sigma.derivative(f.omega, 1) / profiles.star.eos.c_v
    with np.errstate(divide="ignore", invalid="ignore"):
        dlog_omega = f.domega / f.omega
        table = {
            "r": (r, 1.0 / r),
            "rho": (f.rho, profiles.star.nu * dlog_omega),
            "P": (f.P, -f.g / (f.omega * f.e)),
            "omega": (f.omega, dlog_omega),
            "c2": (f.c2, dlog_omega + s_prime * f.domega),
            "g": (f.g, f.dg / f.g),
            "mean_rho": (profiles.mean_rho, 3.0 * (f.rho / profiles.mean_rho - 1.0) / r),
            "N2": (profiles.N2, profiles.dN2 / profiles.N2),
        }
    if isinstance(aux, GoughAux):
        table["E"] = (aux.E, aux.dE / aux.E)
        table["W"] = (aux.W, aux.dlogW)
    elif isinstance(aux, PModeAux):
        table["Ep"] = (aux.Ep, aux.dEp / aux.Ep)
    # Near the center g/r is regular; g'/g = 1/r + (g/r)'/(g/r).
    body = r > 0.0
    dlog_g = table["g"][1].copy()
    dlog_g[body] = 1.0 / r[body] + g_over_r_derivative(profiles)[body] / profiles.g_over_r[body]
    table["g"] = (f.g, dlog_g)
    return table


def scale_height_inv(
    profiles: Profiles,
    expression: str,
    r: np.ndarray | None = None,
    aux: GoughAux | PModeAux | None = None,
) -> np.ndarray:
    """Inverse scale height 1/H[Q] = -d(log Q)/dr for a product of named fields.

    Q is written like ``"rho*g^2/r^4"``. Known names are r, rho, P, omega,
    c2, g, mean_rho and N2, plus E and W with a GoughAux or Ep with a
    PModeAux. Endpoint samples use the leading power law of Q: a
    vanishing total exponent gives the adjacent interior value, otherwise
    the sample is +-inf.

    Args:
        profiles: Background profiles.
        expression: Product expression over named fields.
        r: Optional radii to interpolate the result to.
        aux: Reduction factors supplying E, W or Ep.

    Returns:
        1/H[Q] on the star grid, or at ``r`` if given.

    Raises:
        DomainError: If a factor is unknown or Q <= 0 in the interior.
    """
    table = _component_log_derivatives(profiles, aux)
    factors = parse_product(expression)
    grid = profiles.r
    interior = slice(1, -1)

    value = np.ones_like(grid)
    result = np.zeros_like(grid)
    exp_center = 0.0
    exp_surface = 0.0
    for name, power in factors:
        if name not in table:
            raise DomainError(f"Unknown field {name!r} in scale height of {expression!r}")
        sampled, dlog = table[name]
        value[interior] *= sampled[interior] ** power
        result[interior] -= power * dlog[interior]
        lead_center, lead_surface = _ENDPOINT_EXPONENTS[name]
        if name == "rho":
            lead_surface = profiles.star.nu
        elif name == "P":
            lead_surface = profiles.star.nu + 1.0
        elif name == "W":
            lead_surface = 0.5 * profiles.star.nu
        exp_center += power * lead_center
        exp_surface += power * (lead_surface or 0.0)

    if np.any(~(value[interior] > 0.0)):
        raise DomainError(f"Scale height of {expression!r} needs Q > 0 on (0, R)")

    result[0] = result[1] if exp_center == 0.0 else -np.sign(exp_center) * np.inf
    result[-1] = result[-2] if exp_surface == 0.0 else np.sign(exp_surface) * np.inf
    if r is None:
        return result
    return np.interp(r, grid, result)


# ---------------------------------------------------------------------------
# Reduction factors
# ---------------------------------------------------------------------------

def gough_factors(
    star: EquilibriumStar,
    l: int,
    lam: float,
    grav_pert: float | None = None,
    profiles: Profiles | None = None,
) -> GoughAux:
    """E, frakN^2, W and related factors of the g-mode reduction.

    Args:
        star: Admissible equilibrium.
        l: Spherical degree >= 1.
        lam: Eigenvalue parameter lambda >= 0.
        grav_pert: Gravitational constant of the perturbation; defaults to
            the star's, 0 switches off the potential perturbation.
        profiles: Precomputed background profiles.

    Returns:
        GoughAux on the star grid.

    Raises:
        DomainError: If l < 1 or lam < 0.
        LambdaTooLarge: If E <= 0 anywhere.
    """
    if l < 1:
        raise DomainError(f"Nonradial factors need l >= 1, got {l}")
    if lam < 0.0:
        raise DomainError(f"lambda must be non-negative, got {lam}")
    p = profiles or background_profiles(star)
    gp = star.grav_const if grav_pert is None else grav_pert
    big_g = star.grav_const
    L0 = l * (l + 1)
    r = p.r

    t = 1.0 / p.g_over_r
    dt = -g_over_r_derivative(p) * t**2
    e1 = -4.0 * t + 4.0 * np.pi * big_g * p.rho * t**2
    e2 = -(t**2)
    de1 = -4.0 * dt + 4.0 * np.pi * big_g * (p.drho * t**2 + 2.0 * p.rho * t * dt)
    de2 = -2.0 * t * dt
    E = 1.0 + (e1 + e2 * lam) * lam / L0
    if np.any(E <= 0.0):
        bad = int(np.argmin(E))
        raise LambdaTooLarge(
            f"E(r; lambda) <= 0 for lambda={lam:.6g}",
            lam=lam, l=l, r=float(r[bad]), E=float(E[bad]),
        )
    dE = (de1 + lam * de2) * lam / L0
    frak_n2 = p.N2 - p.g * dE / E

    with np.errstate(divide="ignore", invalid="ignore"):
        frak_q = p.rho * p.g_over_r**2 * E / r**2
        kappa = np.where(r > 0.0, L0 * frak_n2 / r**2, np.nan)
        sl2 = L0 * p.c2 / r**2
        phase = -p.drho * lam * t**2 / (L0 * E)
        base = np.sqrt(p.rho * E) * p.g_over_r / r
        dlog_base = (
            0.5 * p.drho / p.rho + 0.5 * dE / E + g_over_r_derivative(p) / p.g_over_r - 1.0 / r
        )
    if kappa.size > 2:
        kappa[0] = 2.0 * kappa[1] - kappa[2] if np.isfinite(kappa[1]) else np.nan
    exponent = 2.0 * np.pi * gp * cumulative_radial(phase, star.radius_R)
    W = base * np.exp(exponent)
    dlog_w = dlog_base + 2.0 * np.pi * gp * phase

    logger.debug("gough_factors l=%d lam=%.6g min E=%.6g", l, lam, float(E.min()))
    return GoughAux(
        lam=lam, l=l, L0=L0, grav_pert=gp, r=r, t=t, dt=dt,
        E=E, E1=e1, E2=e2, dE1=de1, dE2=de2, dE=dE, frakN2=frak_n2, frakQ=frak_q,
        W=W, dlogW=dlog_w, Sl2=sl2, kappa=kappa,
    )


def pmode_factors(
    star: EquilibriumStar,
    l: int,
    mu: float,
    grav_pert: float | None = None,
    profiles: Profiles | None = None,
) -> PModeAux:
    """Ep, kappa^p = 1/c^2 and the p-branch frakN^2 at mu = 1/lambda.

    Raises:
        DomainError: If l < 1 or mu < 0.
        MuTooLarge: If Ep <= 0 anywhere.
    """
    if l < 1:
        raise DomainError(f"Nonradial factors need l >= 1, got {l}")
    if mu < 0.0:
        raise DomainError(f"mu must be non-negative, got {mu}")
    p = profiles or background_profiles(star)
    gp = star.grav_const if grav_pert is None else grav_pert
    big_g = star.grav_const
    L0 = l * (l + 1)
    r = p.r

    ep1 = 4.0 * p.g_over_r - 4.0 * np.pi * big_g * p.rho
    ep2 = -L0 * p.g_over_r**2
    Ep = 1.0 + (ep1 + mu * ep2) * mu
    if np.any(Ep <= 0.0):
        bad = int(np.argmin(Ep))
        raise MuTooLarge(
            f"Ep(r; mu) <= 0 for mu={mu:.6g}", mu=mu, l=l, r=float(r[bad]), Ep=float(Ep[bad]),
        )
    d_gr = g_over_r_derivative(p)
    dep1 = 4.0 * d_gr - 4.0 * np.pi * big_g * p.drho
    dep2 = -2.0 * L0 * p.g_over_r * d_gr
    dEp = (dep1 + mu * dep2) * mu

    with np.errstate(divide="ignore", invalid="ignore"):
        kappap = 1.0 / p.c2
        frak_n2p = (
            p.N2 + 8.0 * np.pi * big_g * p.rho - 6.0 * p.g_over_r - p.g * dEp / Ep
        )
        base = r**2 / (p.rho * Ep)
    exponent = -4.0 * np.pi * gp * mu * cumulative_radial(p.drho / Ep, star.radius_R)
    Wp = base * np.exp(exponent)

    logger.debug("pmode_factors l=%d mu=%.6g min Ep=%.6g", l, mu, float(Ep.min()))
    return PModeAux(
        mu=mu, l=l, L0=L0, grav_pert=gp, r=r, Ep=Ep, Ep1=ep1, Ep2=ep2, dEp=dEp,
        Wp=Wp, kappap=kappap, frakN2p=frak_n2p,
    )


def _largest_parameter(min_factor, floor: float, start: float) -> float:
    hi = start
    for _ in range(200):
        if min_factor(hi) < floor:
            break
        hi *= 2.0
    else:
        raise DomainError("Could not bracket the largest admissible parameter")
    return float(brentq(lambda x: min_factor(x) - floor, 0.0, hi, xtol=1e-14 * hi))


def lambda0_default(star: EquilibriumStar, l: int, eps: float = 0.1) -> float:
    """Largest lambda keeping min E >= 1 - eps, by bracketed bisection."""
    p = background_profiles(star)
    L0 = l * (l + 1)
    t = 1.0 / p.g_over_r
    e1 = -4.0 * t + 4.0 * np.pi * star.grav_const * p.rho * t**2
    e2 = -(t**2)

    def min_e(lam: float) -> float:
        return float(np.min(1.0 + (e1 + e2 * lam) * lam / L0))

    lam0 = _largest_parameter(min_e, 1.0 - eps, star.g_O)
    logger.debug("lambda0(l=%d, eps=%.3g) = %.10g", l, eps, lam0)
    return lam0


def mu0_default(star: EquilibriumStar, l: int, eps: float = 0.1) -> float:
    """Largest mu keeping min Ep >= 1 - eps, by bracketed bisection."""
    p = background_profiles(star)
    L0 = l * (l + 1)
    ep1 = 4.0 * p.g_over_r - 4.0 * np.pi * star.grav_const * p.rho
    ep2 = -L0 * p.g_over_r**2

    def min_ep(mu: float) -> float:
        return float(np.min(1.0 + (ep1 + mu * ep2) * mu))

    return _largest_parameter(min_ep, 1.0 - eps, 1.0 / star.g_O)
