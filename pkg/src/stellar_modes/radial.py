"""Radial (l = 0) pulsation spectrum.

The operator acts on psi = V/r in L^2(rho r^4 dr):

    L psi = -(1/(rho r^4)) (gamma r^4 P psi')' + q00 psi
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.linalg import eigh_tridiagonal

from stellar_modes.config import Tolerances
from stellar_modes.sl_solver import (
    LiouvilleMap,
    LiouvilleProblem,
    SpectrumSlice,
    liouville_transform,
    sl_eigenfunction,
    sl_eigenvalues,
)
from stellar_modes.utils import cumulative_radial

if TYPE_CHECKING:
    from stellar_modes.equilibrium import EquilibriumStar, Fields

logger = logging.getLogger(__name__)


def _center_ratios(star: EquilibriumStar, f: Fields) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """omega'/r, g/r and S'/r with their center limits."""
    r = f.r
    body = r > 0.0
    b2 = star.orbit.b2
    s1_center = float(star.eos.sigma.derivative(star.orbit.omega_O, 1))
    domega_r = np.full_like(r, 2.0 * b2)
    g_r = np.full_like(r, star.g_O)
    ds_r = np.full_like(r, 2.0 * b2 * s1_center)
    domega_r[body] = f.domega[body] / r[body]
    g_r[body] = f.g[body] / r[body]
    ds_r[body] = f.dS[body] / r[body]
    return domega_r, g_r, ds_r


def radial_q00(star: EquilibriumStar, r: np.ndarray | None = None, form: str = "safe") -> np.ndarray:
    """Potential q00 of the radial operator.

    The ``"safe"`` form works in omega = rho^(gamma-1), where the surface
    singularities of the individual terms cancel algebraically. The
    ``"naive"`` form sums the textbook terms in rho and P and is only
    reliable away from the surface.

    Args:
        star: Admissible equilibrium.
        r: Radii; defaults to the star grid.
        form: "safe" or "naive".

    Returns:
        q00 samples; the safe form is finite on [0, R].
    """
    f = star.fields if r is None else star.fields_at(r)
    eos = star.eos
    gamma, c_v, nu = eos.gamma, eos.c_v, eos.nu
    big_g = star.grav_const
    domega_r, g_r, ds_r = _center_ratios(star, f)
    s1 = eos.sigma.derivative(f.omega, 1)
    s2 = eos.sigma.derivative(f.omega, 2)

    if form == "safe":
        return (
            -gamma * nu * f.e * (f.ddomega + (gamma - 1.0) / (gamma * c_v) * f.dS * f.domega)
            - gamma * nu * f.e * domega_r
            + 3.0 * (gamma - 1.0) * g_r
            - (f.omega * f.e * ds_r - f.g * f.dS + f.omega * f.e * f.ddS) / c_v
            - 4.0 * math.pi * big_g * f.rho
        )
    if form != "naive":
        raise ValueError(f"Unknown q00 form {form!r}")
    rho, P = f.rho, f.P
    dP = -rho * f.g
    schwarzschild = -f.dS / (gamma * c_v)
    dschwarzschild = -(s2 * f.domega**2 + s1 * f.ddomega) / (gamma * c_v)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (
            -gamma * P / rho**2 * f.ddrho
            - (gamma - 1.0) / rho**2 * dP * f.drho
            + gamma * P / rho**3 * f.drho**2
            - gamma * P / (f.r * rho**2) * f.drho
            - 3.0 * (gamma - 1.0) / (f.r * rho) * dP
            + gamma * (schwarzschild * P + f.r * dschwarzschild * P + f.r * schwarzschild * dP) / (f.r * rho)
            - 4.0 * math.pi * big_g * rho
        )


def radial_endpoint_strengths(star: EquilibriumStar) -> tuple[float, float]:
    """Inverse-square strengths of the normal-form potential: 2 and (4 nu^2 - 1)/4."""
    nu = star.nu
    return 2.0, (4.0 * nu**2 - 1.0) / 4.0


def radial_liouville(star: EquilibriumStar) -> LiouvilleMap:
    """Liouville map for a = gamma r^4 P, c = r^4 rho with analytic log-derivatives."""
    f = star.fields
    r = f.r
    eos = star.eos
    nu = eos.nu
    a = eos.gamma * r**4 * f.P
    c = r**4 * f.rho
    with np.errstate(divide="ignore", invalid="ignore"):
        we = f.omega * f.e
        dlog_a = 4.0 / r - f.g / we
        dlog_c = 4.0 / r + nu * f.domega / f.omega
        dd_a = -4.0 / r**2 - f.dg / we + f.g * (f.domega + f.omega * f.dS / eos.c_v) / (f.omega**2 * f.e)
        dd_c = -4.0 / r**2 + nu * (f.ddomega / f.omega - f.domega**2 / f.omega**2)
        speed = 1.0 / np.sqrt(f.c2)
    x = cumulative_radial(speed, star.radius_R)
    return liouville_transform(a, c, radial_q00(star), r, dlog_a, dlog_c, dd_a + dd_c, x=x)


def measured_endpoint_strengths(transform: LiouvilleMap, count: int = 12) -> tuple[float, float]:
    """Intercepts of q x^2 and q (x_plus - x)^2 fitted next to each endpoint."""
    x, q, x_plus = transform.x, transform.q, transform.x_plus
    left = slice(1, 1 + count)
    right = slice(-1 - count, -1)
    center = np.polyfit(x[left] ** 2, q[left] * x[left] ** 2, 1)[1]
    gap = x_plus - x[right]
    surface = np.polyfit(gap, q[right] * gap**2, 1)[1]
    return float(center), float(surface)


def radial_problem(star: EquilibriumStar) -> tuple[LiouvilleProblem, LiouvilleMap]:
    transform = radial_liouville(star)
    k_left, k_right = radial_endpoint_strengths(star)
    problem = LiouvilleProblem.from_samples(
        transform.x[1:-1], transform.q[1:-1], transform.x_plus, k_left, k_right, label="radial",
    )
    return problem, transform


@dataclass(frozen=True)
class RadialMode:
    n: int
    eigenvalue: float
    node_count: int
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    residual: float = 0.0


@dataclass(frozen=True)
class RadialSpectrum:
    """Radial eigenvalues with eigenfunctions in y(x) and psi(r) form."""

    eigenvalues: np.ndarray
    modes: tuple[RadialMode, ...]
    x_plus: float
    spectrum: SpectrumSlice = field(repr=False)

    def rows(self) -> list[dict[str, Any]]:
        return [
            {"n": m.n, "lambda": m.eigenvalue, "node_count": m.node_count}
            for m in self.modes
        ]


def radial_spectrum(
    star: EquilibriumStar,
    n_max: int,
    tolerances: Tolerances | None = None,
    strict: bool = False,
) -> RadialSpectrum:
    """Lowest ``n_max`` radial eigenvalues and eigenfunctions.

    Args:
        star: Admissible equilibrium.
        n_max: Number of modes.
        tolerances: Numerical tolerances.
        strict: Raise FormulationMismatch instead of flagging.

    Returns:
        RadialSpectrum with psi and V = r psi sampled on the star grid.
    """
    tol = tolerances or Tolerances()
    problem, transform = radial_problem(star)
    spectrum = sl_eigenvalues(problem, n_max, tol, strict=strict)
    values = spectrum.eigenvalues
    modes = []
    for n in range(n_max):
        neighbors = (
            values[n - 1] if n > 0 else None,
            values[n + 1] if n + 1 < n_max else None,
        )
        ef = sl_eigenfunction(problem, float(values[n]), neighbors=neighbors, tolerances=tol)
        y_on_grid = np.interp(transform.x, np.concatenate([[0.0], ef.x, [transform.x_plus]]),
                              np.concatenate([[0.0], ef.y, [0.0]]))
        psi = transform.to_psi(y_on_grid)
        modes.append(RadialMode(
            n=n + 1, eigenvalue=float(values[n]), node_count=ef.node_count,
            x=ef.x, y=ef.y, psi=psi, V=star.grid_r * psi, residual=ef.residual,
        ))
    logger.info("Radial spectrum: %d modes, lambda_1=%.10g, x_plus=%.6g",
                n_max, float(values[0]), transform.x_plus)
    return RadialSpectrum(values, tuple(modes), transform.x_plus, spectrum)


def radial_dense_oracle(star: EquilibriumStar, n_max: int, nodes: int = 2000) -> np.ndarray:
    """Independent conservative finite differences of the radial operator.

    Discretizes (a psi')' in flux form on a cosine-graded radius mesh with
    the weight rho r^4 lumped, extrapolating ``nodes`` and ``2*nodes``.
    Endpoint fluxes vanish with a.
    """
    gamma = star.eos.gamma

    def level(count: int) -> np.ndarray:
        t = np.linspace(0.0, np.pi, count + 1)
        r = 0.5 * star.radius_R * (1.0 - np.cos(t))
        mid = 0.5 * (r[1:] + r[:-1])
        h = np.diff(r)
        f_mid = star.fields_at(mid)
        flux = gamma * mid**4 * f_mid.P / h
        inner = r[1:-1]
        f_in = star.fields_at(inner)
        mass = inner**4 * f_in.rho * 0.5 * (h[:-1] + h[1:])
        diag = (flux[:-1] + flux[1:]) / mass + radial_q00(star, inner)
        # The outermost half-cells carry no flux.
        diag[0] -= flux[0] / mass[0]
        diag[-1] -= flux[-1] / mass[-1]
        off = -flux[1:-1] / np.sqrt(mass[:-1] * mass[1:])
        return eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, n_max - 1))

    return (4.0 * level(2 * nodes) - level(nodes)) / 3.0


def rayleigh_lower_bound(star: EquilibriumStar) -> float:
    """Lower bound min q00 for every radial eigenvalue.

    The flux term of the quadratic form is non-negative, so each Rayleigh
    quotient is at least the infimum of q00.
    """
    return float(np.min(radial_q00(star)))