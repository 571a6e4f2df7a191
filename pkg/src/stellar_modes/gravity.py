"""Radial self-gravity operators.

H_l is the inverse of -(1/r^2)(r^2 H')' + l(l+1)H/r^2 with regular
behavior at the center and decay outside the star:

    H_l f(r) = 1/(2l+1) [ r^l int_r^R f r'^(1-l) dr' + r^-(l+1) int_0^r f r'^(l+2) dr' ]

The potential perturbation is dPhi = -4 pi G H_l[drho].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
from scipy.integrate import cumulative_simpson

from stellar_modes.config import Tolerances
from stellar_modes.errors import DomainError, GravityCouplingTooStrong
from stellar_modes.profiles import GoughAux, background_profiles
from stellar_modes.utils import radial_weights, theta_grid

if TYPE_CHECKING:
    from stellar_modes.equilibrium import EquilibriumStar
    from stellar_modes.profiles import PModeAux

logger = logging.getLogger(__name__)


def hl_of_one(r: np.ndarray | float, radius: float, l: int) -> np.ndarray:
    """Closed form of H_l applied to the indicator of [0, R], for r <= R."""
    r = np.asarray(r, dtype=float)
    k = 2 * l + 1
    if l == 0:
        return radius**2 / 2.0 - r**2 / 6.0
    if l == 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            log_term = np.where(r > 0.0, r**2 * np.log(radius / np.where(r > 0.0, r, 1.0)), 0.0)
        return (log_term + r**2 / 5.0) / k
    return ((r**l * radius ** (2 - l) - r**2) / (2 - l) + r**2 / (l + 3)) / k


@dataclass(frozen=True)
class HlOperator:
    """Quadrature realization of H_l and r d/dr H_l on the clustered star grid.

    ``apply`` and ``apply_dot`` use cumulative Simpson integrals in the grid
    angle. ``nystrom_matrix`` is the symmetric kernel realization used for
    gravitational energies, where the discrete form is exactly symmetric.
    """

    r: np.ndarray
    radius: float
    l: int

    def __post_init__(self) -> None:
        if self.l < 0:
            raise DomainError(f"Degree l must be >= 0, got {self.l}")

    @classmethod
    def for_star(cls, star: EquilibriumStar, l: int) -> HlOperator:
        return cls(star.grid_r, star.radius_R, l)

    @cached_property
    def _jacobian(self) -> np.ndarray:
        theta = theta_grid(len(self.r))
        return 0.5 * self.radius * np.sin(theta)

    def _cumulative(self, values: np.ndarray, reverse: bool = False) -> np.ndarray:
        theta = theta_grid(len(self.r))
        jac = self._jacobian.reshape((-1,) + (1,) * (values.ndim - 1))
        integrand = np.nan_to_num(values * jac, nan=0.0, posinf=0.0, neginf=0.0)
        if not reverse:
            return cumulative_simpson(integrand, x=theta, axis=0, initial=0.0)
        flipped = cumulative_simpson(integrand[::-1], x=theta[::-1], axis=0, initial=0.0)
        return -flipped[::-1]

    def _pieces(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(r^l int_r^R f r'^(1-l), r^-(l+1) int_0^r f r'^(l+2)) with center limits."""
        l = self.l
        shape = (-1,) + (1,) * (f.ndim - 1)
        r = self.r.reshape(shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            outer = self._cumulative(f * r ** (1.0 - l), reverse=True)
            inner = self._cumulative(f * r ** (l + 2.0))
            outer = outer * r**l
            inner = inner / r ** (l + 1.0)
        outer[0] = outer[0] if l == 0 else 0.0
        inner[0] = 0.0
        return outer, inner

    def apply(self, f: np.ndarray) -> np.ndarray:
        """H_l f sampled on the grid; f may carry extra trailing axes."""
        outer, inner = self._pieces(np.asarray(f))
        return (outer + inner) / (2 * self.l + 1)

    def apply_dot(self, f: np.ndarray) -> np.ndarray:
        """r d/dr (H_l f) from the closed kernel form, without differencing."""
        outer, inner = self._pieces(np.asarray(f))
        return (self.l * outer - (self.l + 1) * inner) / (2 * self.l + 1)

    def exterior_coefficient(self, f: np.ndarray) -> float:
        """C with H_l f = C r^-(l+1) for r >= R."""
        total = self._cumulative(np.asarray(f) * self.r ** (self.l + 2.0))[-1]
        return float(total) / (2 * self.l + 1)

    def exterior(self, f: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(H_l f, r d/dr H_l f) at radii r >= R."""
        r = np.asarray(r, dtype=float)
        if np.any(r < self.radius):
            raise DomainError("Exterior evaluation needs r >= R")
        values = self.exterior_coefficient(f) * r ** -(self.l + 1.0)
        return values, -(self.l + 1) * values

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.apply(np.eye(len(self.r)))

    @cached_property
    def dot_matrix(self) -> np.ndarray:
        return self.apply_dot(np.eye(len(self.r)))

    @cached_property
    def weights(self) -> np.ndarray:
        return radial_weights(self.radius, len(self.r)) * self.r**2

    @cached_property
    def nystrom_matrix(self) -> np.ndarray:
        """Nystrom matrix of the symmetric kernel r_<^l / r_>^(l+1) / (2l+1).

        The diagonal carries the singularity subtraction against the closed
        form of H_l[1], so ``weights * nystrom_matrix`` is symmetric.
        """
        r = self.r
        l = self.l
        lo = np.minimum.outer(r, r)
        hi = np.maximum.outer(r, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            kernel = lo**l / hi ** (l + 1.0) / (2 * l + 1)
        kernel = np.nan_to_num(kernel, nan=0.0, posinf=0.0)
        np.fill_diagonal(kernel, 0.0)
        w = self.weights
        off = kernel * w[None, :]
        correction = hl_of_one(r, self.radius, l) - off.sum(axis=1)
        # Singular self-interaction folded onto the diagonal.
        return off + np.diag(correction)

    def gravitational_energy(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Quadrature of int (H_l f) conj(g) r^2 dr."""
        value = np.sum(self.weights * (self.nystrom_matrix @ f) * np.conj(g))
        return complex(value) if np.iscomplexobj(value) else float(value)


def apply_Hl(f: np.ndarray, l: int, star: EquilibriumStar) -> np.ndarray:
    """H_l f on the star grid.

    Args:
        f: Samples of f on ``star.grid_r``.
        l: Degree >= 0.
        star: Equilibrium supplying the grid.

    Returns:
        H_l f on the grid.
    """
    return HlOperator.for_star(star, l).apply(f)


def apply_Hl_dot(f: np.ndarray, l: int, star: EquilibriumStar) -> np.ndarray:
    """r d/dr H_l f on the star grid."""
    return HlOperator.for_star(star, l).apply_dot(f)


def hl_ode_residual(f: np.ndarray, l: int, star: EquilibriumStar) -> float:
    """Relative residual of the integrated form of the defining ODE.

    Integrating r^2 times the ODE from 0 gives
    r H-dot(r) + int_0^r f r'^2 - l(l+1) int_0^r H = 0.
    """
    op = HlOperator.for_star(star, l)
    f = np.asarray(f, dtype=float)
    h = op.apply(f)
    hdot = op.apply_dot(f)
    r = star.grid_r
    residual = r * hdot + op._cumulative(f * r**2) - l * (l + 1) * op._cumulative(h)
    scale = max(float(np.max(np.abs(op._cumulative(f * r**2)))), np.finfo(float).tiny)
    return float(np.max(np.abs(residual)) / scale)


# ---------------------------------------------------------------------------
# Coupled potential solve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingCoefficients:
    """alpha, beta of X = 4 pi G H_l[alpha X + beta X-dot + Y]."""

    alpha: np.ndarray
    beta: np.ndarray
    grav_pert: float


@dataclass(frozen=True)
class DeltaPhiSolution:
    X: np.ndarray
    Xdot: np.ndarray
    method: str
    iterations: int
    agreement: float | None
    neumann_fallback: bool


def _drho_over_r(star: EquilibriumStar, drho: np.ndarray) -> np.ndarray:
    r = star.grid_r
    out = np.empty_like(r)
    body = r > 0.0
    out[body] = drho[body] / r[body]
    out[~body] = -star.rho_O1
    return out


def coupling_coefficients(
    star: EquilibriumStar, l: int, lam: float, aux: GoughAux | PModeAux,
) -> CouplingCoefficients:
    """alpha = -rho'/(gE) and beta = -rho' lam r/(l(l+1) g^2 E).

    With a PModeAux, E is recovered from Ep through
    E = -lam^2 r^2 Ep / (l(l+1) g^2).
    """
    p = background_profiles(star)
    L0 = l * (l + 1)
    if isinstance(aux, GoughAux):
        big_e = aux.E
    else:
        big_e = _gough_e_from_p(aux, lam)
    dr = _drho_over_r(star, p.drho)
    alpha = -dr / (p.g_over_r * big_e)
    beta = -dr * lam / (L0 * p.g_over_r**2 * big_e)
    return CouplingCoefficients(alpha=alpha, beta=beta, grav_pert=aux.grav_pert)


def _gough_e_from_p(aux: PModeAux, lam: float) -> np.ndarray:
    # Ep2 = -l(l+1)(g/r)^2
    return lam**2 * aux.Ep / aux.Ep2


def check_condition_G(
    star: EquilibriumStar, l: int, lam: float, aux: GoughAux | PModeAux,
) -> float:
    """delta_G: the larger of sup|4 pi G alpha| and sup|4 pi G beta|.

    Returns 0 when the perturbation gravitational constant is zero.
    """
    coeffs = coupling_coefficients(star, l, lam, aux)
    scale = 4.0 * math.pi * coeffs.grav_pert
    first = float(np.max(np.abs(scale * coeffs.alpha)))
    second = float(np.max(np.abs(scale * coeffs.beta)))
    return max(first, second)


def solve_delta_phi(
    Y: np.ndarray,
    star: EquilibriumStar,
    l: int,
    lam: float,
    aux: GoughAux | PModeAux,
    tolerances: Tolerances | None = None,
    method: str = "both",
) -> DeltaPhiSolution:
    """Solve X = 4 pi G H_l[alpha X + beta X-dot + Y] together with X-dot.

    X is dPhi and X-dot is r d(dPhi)/dr. The dense 2N system and the
    Neumann series are both available; ``method="both"`` runs both and
    records their agreement.

    Args:
        Y: Source samples on the star grid (real or complex).
        star: Equilibrium.
        l: Degree >= 1.
        lam: Eigenvalue parameter.
        aux: Reduction factors at (l, lam).
        tolerances: Thresholds for delta_G and the Neumann iteration.
        method: "dense", "neumann" or "both".

    Returns:
        DeltaPhiSolution with both components.

    Raises:
        GravityCouplingTooStrong: If delta_G exceeds the threshold.
    """
    tol = tolerances or Tolerances()
    n = len(star.grid_r)
    Y = np.asarray(Y)
    coeffs = coupling_coefficients(star, l, lam, aux)
    if coeffs.grav_pert == 0.0:
        zero = np.zeros_like(Y)
        return DeltaPhiSolution(zero, zero.copy(), "cowling", 0, None, False)

    delta_g = check_condition_G(star, l, lam, aux)
    if delta_g > tol.delta_G:
        raise GravityCouplingTooStrong(
            f"delta_G={delta_g:.4g} exceeds {tol.delta_G}", delta_G=delta_g, l=l, lam=lam,
        )

    op = HlOperator.for_star(star, l)
    scale = 4.0 * math.pi * coeffs.grav_pert
    stacked = np.vstack([op.matrix, op.dot_matrix]) * scale
    kernel = np.hstack([stacked * coeffs.alpha[None, :], stacked * coeffs.beta[None, :]])
    rhs = stacked @ Y

    dense = None
    if method in ("dense", "both"):
        dense = np.linalg.solve(np.eye(2 * n) - kernel, rhs)

    neumann = None
    iterations = 0
    fallback = False
    if method in ("neumann", "both"):
        z = rhs.copy()
        norm_rhs = max(float(np.max(np.abs(rhs))), np.finfo(float).tiny)
        for iterations in range(1, 501):
            nxt = kernel @ z + rhs
            change = float(np.max(np.abs(nxt - z))) / norm_rhs
            z = nxt
            if not np.isfinite(change) or change > 1e6:
                break
            if change <= tol.neumann * 1e-2:
                neumann = z
                break
        if neumann is None:
            fallback = True
            logger.warning("Neumann iteration did not converge for l=%d lam=%.6g; using dense solve", l, lam)
            if dense is None:
                dense = np.linalg.solve(np.eye(2 * n) - kernel, rhs)

    agreement = None
    if dense is not None and neumann is not None:
        scale_z = max(float(np.max(np.abs(dense))), np.finfo(float).tiny)
        agreement = float(np.max(np.abs(dense - neumann))) / scale_z
        if agreement > tol.neumann:
            logger.warning("Dense and Neumann potential solves differ by %.3g", agreement)
    chosen = dense if dense is not None else neumann
    used = "dense" if dense is not None else "neumann"
    return DeltaPhiSolution(
        X=chosen[:n], Xdot=chosen[n:], method=used, iterations=iterations,
        agreement=agreement, neumann_fallback=fallback,
    )


def delta_phi_residual(
    solution: DeltaPhiSolution,
    Y: np.ndarray,
    star: EquilibriumStar,
    l: int,
    lam: float,
    aux: GoughAux | PModeAux,
) -> float:
    """Relative residual of (X, X-dot) substituted back into the coupled system."""
    coeffs = coupling_coefficients(star, l, lam, aux)
    op = HlOperator.for_star(star, l)
    scale = 4.0 * math.pi * coeffs.grav_pert
    source = coeffs.alpha * solution.X + coeffs.beta * solution.Xdot + Y
    res_x = solution.X - scale * op.apply(source)
    res_dot = solution.Xdot - scale * op.apply_dot(source)
    norm = max(float(np.max(np.abs(solution.X))), float(np.max(np.abs(solution.Xdot))),
               np.finfo(float).tiny)
    return max(float(np.max(np.abs(res_x))), float(np.max(np.abs(res_dot)))) / norm
