"""Invariant suite run by ``stellar-modes validate``.

Each check measures one structural property of the discretization on a
built star and compares it against the matching tolerance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from stellar_modes.config import Tolerances
from stellar_modes.equilibrium import check_admissible, lane_emden_radius
from stellar_modes.errors import StellarModesError
from stellar_modes.gravity import HlOperator, hl_ode_residual
from stellar_modes.nonradial import displacement_fields, operator_residual, quadratic_form
from stellar_modes.ode4 import (
    eigen_determinant,
    frobenius_center,
    frobenius_surface,
    fundamental_determinant_drift,
    series_overlap,
)
from stellar_modes.profiles import mu0_default
from stellar_modes.radial import radial_spectrum

if TYPE_CHECKING:
    from stellar_modes.equilibrium import EquilibriumStar

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InvariantCheck:
    name: str
    value: float
    threshold: float
    passed: bool | None
    detail: str = ""

    @property
    def status(self) -> str:
        if self.passed is None:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status,
            "value": self.value,
            "threshold": self.threshold,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[InvariantCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if c.passed is False]

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _check(name: str, value: float, threshold: float, detail: str = "") -> InvariantCheck:
    return InvariantCheck(name, float(value), float(threshold), bool(value <= threshold), detail)


def symmetry_defect(matrix: np.ndarray, weights: np.ndarray) -> float:
    """Relative antisymmetric part of diag(weights) @ matrix."""
    weighted = weights[:, None] * matrix
    scale = max(float(np.max(np.abs(weighted))), np.finfo(float).tiny)
    return float(np.max(np.abs(weighted - weighted.T)) / scale)


def _random_smooth(r: np.ndarray, radius: float, rng: np.random.Generator, terms: int = 5) -> np.ndarray:
    x = r / radius
    coeffs = rng.normal(size=terms)
    return sum(c * np.cos(k * math.pi * x) for k, c in enumerate(coeffs))


def run_invariant_suite(
    star: EquilibriumStar,
    tolerances: Tolerances | None = None,
    *,
    seed: int = 0,
    degrees: tuple[int, ...] = (0, 1, 2, 3, 4),
    samples: int = 5,
    asymmetry: float = 0.0,
) -> ValidationReport:
    """Run every invariant check against one star.

    Args:
        star: Built equilibrium.
        tolerances: Thresholds (tighten with Tolerances.scaled).
        seed: Seed for the random test functions.
        degrees: Degrees for the H_l checks.
        samples: Random functions per degree.
        asymmetry: Relative size of an upper-triangular perturbation added
            to the H_l matrices before the symmetry check; for self-tests.

    Returns:
        ValidationReport; checks that cannot run on this star are SKIP.
    """
    tol = tolerances or Tolerances()
    rng = np.random.default_rng(seed)
    r = star.grid_r
    radius = star.radius_R
    checks: list[InvariantCheck] = []

    report = check_admissible(star, tol)
    checks.append(InvariantCheck(
        "admissibility", float(len(report.failures())), 0.0, report.passed,
        ", ".join(report.failures()),
    ))

    sigma = star.eos.sigma
    if sigma.is_constant:
        xi = radius / star.length_scale
        expected = lane_emden_radius(star.nu)
        checks.append(_check("lane_emden_radius", abs(xi - expected) / expected, 1e-6,
                             f"xi_1={xi:.10g} reference={expected:.10g}"))
    else:
        checks.append(InvariantCheck("lane_emden_radius", math.nan, 1e-6, None, "stratified star"))

    worst_sym = worst_ode = 0.0
    for l in degrees:
        op = HlOperator.for_star(star, l)
        matrix = op.nystrom_matrix
        if asymmetry:
            matrix = matrix + asymmetry * np.max(np.abs(matrix)) * np.triu(rng.normal(size=matrix.shape), 1)
        worst_sym = max(worst_sym, symmetry_defect(matrix, op.weights))
        for _ in range(samples):
            worst_ode = max(worst_ode, hl_ode_residual(_random_smooth(r, radius, rng), l, star))
    checks.append(_check("hl_symmetry", worst_sym, tol.symmetry))
    checks.append(_check("hl_ode_identity", worst_ode, tol.hl_ode))

    worst_form = 0.0
    for _ in range(samples):
        first = (_random_smooth(r, radius, rng), _random_smooth(r, radius, rng))
        second = (_random_smooth(r, radius, rng), _random_smooth(r, radius, rng))
        ab = quadratic_form(first, second, star, 2)
        ba = quadratic_form(second, first, star, 2)
        worst_form = max(worst_form, abs(ab - np.conj(ba)) / max(abs(ab), abs(ba), np.finfo(float).tiny))
    checks.append(_check("quadratic_form_hermitian", worst_form, tol.symmetry))

    ones = np.ones_like(r)
    translation = displacement_fields(ones, ones, star, 1)
    checks.append(_check("l1_translation_kernel",
                         operator_residual(translation, star, 1, 0.0).relative, tol.operator_residual))

    try:
        spectrum = radial_spectrum(star, 4, tol)
        nodes_ok = all(m.node_count == m.n - 1 for m in spectrum.modes)
        lams = [m.eigenvalue for m in spectrum.modes]
        increasing = all(b > a for a, b in zip(lams, lams[1:]))
        checks.append(InvariantCheck("radial_node_count", float(not (nodes_ok and increasing)), 0.0,
                                     nodes_ok and increasing, f"lambda={lams}"))
    except StellarModesError as e:
        checks.append(InvariantCheck("radial_node_count", math.nan, 0.0, False, str(e)))

    if star.rational_nu is None:
        checks.append(InvariantCheck("determinant_r0_invariance", math.nan, tol.determinant_spread, None,
                                     "nu is not rational"))
        checks.append(InvariantCheck("series_overlap", math.nan, tol.series_overlap, None, "nu is not rational"))
    else:
        lam = 2.5 / mu0_default(star, 2, tol.eps_E)
        try:
            spread = eigen_determinant(star, 2, lam, tolerances=tol).spread
            checks.append(_check("determinant_r0_invariance", spread, tol.determinant_spread,
                                 f"lambda={lam:.6g}"))
        except StellarModesError as e:
            checks.append(InvariantCheck("determinant_r0_invariance", math.nan,
                                         tol.determinant_spread, False, str(e)))
        drift = fundamental_determinant_drift(star, 2, lam, tolerances=tol)
        checks.append(_check("liouville_drift", drift, tol.determinant_spread))
        try:
            overlap = series_overlap(star, 2, lam, tolerances=tol)
            checks.append(_check("series_overlap", max(overlap.values()), tol.series_overlap,
                                 f"center={overlap['center']:.3e} surface={overlap['surface']:.3e}"))
            zeros = {
                **frobenius_center(star, 2, lam, tolerances=tol).structural_zeros(),
                **frobenius_surface(star, 2, lam, tolerances=tol).structural_zeros(),
            }
            checks.append(_check("series_structural_zeros", max(zeros.values()), tol.series_overlap,
                                 ", ".join(f"{k}={v:.3e}" for k, v in zeros.items())))
        except StellarModesError as e:
            checks.append(InvariantCheck("series_overlap", math.nan, tol.series_overlap, False, str(e)))

    result = ValidationReport(tuple(checks))
    logger.info("Invariant suite: %d checks, failures=%s", len(checks), result.failures())
    return result
