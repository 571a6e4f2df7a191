"""Exception hierarchy for stellar_modes.

Every failure raised by the library derives from ``StellarModesError`` so the
CLI can record per-mode failures and keep going.
"""

from __future__ import annotations

from typing import Any


class StellarModesError(Exception):
    """Base class for all library errors.

    Args:
        message: Human readable description.
        **diagnostics: Measured values attached for reporting.
    """

    def __init__(self, message: str, **diagnostics: Any) -> None:
        super().__init__(message)
        self.diagnostics: dict[str, Any] = diagnostics

    def to_dict(self) -> dict[str, Any]:
        """Serializable form used in mode tables and reports."""
        return {
            "error": type(self).__name__,
            "message": str(self),
            **{k: _plain(v) for k, v in self.diagnostics.items()},
        }


def _plain(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    return value


class DomainError(StellarModesError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigError(StellarModesError, ValueError):
    """Invalid or unknown configuration entries."""


# Equilibrium construction

class EosError(StellarModesError):
    """Equation of state violates 1 < gamma < 2 or ellipticity."""


class InversionError(EosError):
    """Inversion u -> rho failed to bracket or converge."""


class NoFiniteRadius(StellarModesError):
    """The Lane-Emden type orbit has no zero before r_max."""


class SurfaceFitError(StellarModesError):
    """Surface or center asymptotic fit residual above threshold."""


# Auxiliary factors

class LambdaTooLarge(StellarModesError):
    """E(r; lambda) is not positive on the grid."""


class MuTooLarge(StellarModesError):
    """E^p(r; mu) is not positive on the grid."""


# Operators and eigen solvers

class GravityCouplingTooStrong(StellarModesError):
    """Condition (G) fails: delta_G exceeds the contraction threshold."""


class TransformError(StellarModesError):
    """Liouville transform cannot be built (non-integrable weight)."""


class FormulationMismatch(StellarModesError):
    """Two independent eigenvalue paths disagree beyond tolerance."""


class IllConditioned(StellarModesError):
    """Eigenvalue too close to a neighbour for inverse iteration."""


class GModeAssumptionViolated(StellarModesError):
    """Stratification (1/r) dS/dr is not bounded below by a positive number."""


class NoRootInWindow(StellarModesError):
    """Fixed-point function has no sign change on the search window."""


class NuNotRational(StellarModesError):
    """nu = 1/(gamma - 1) has no rational form with denominator <= 64."""


class IntegratorError(StellarModesError):
    """ODE integration failed even after refining the handoff radius."""


class ResolventNearPole(StellarModesError):
    """Inhomogeneous solve requested too close to an eigenvalue."""
