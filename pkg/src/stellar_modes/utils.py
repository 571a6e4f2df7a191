"""Grid, quadrature and small parsing helpers shared across stellar_modes."""

from __future__ import annotations

import re
from fractions import Fraction
from typing import TYPE_CHECKING, Final, TypeVar

import numpy as np
from scipy.integrate import cumulative_simpson

from stellar_modes.errors import DomainError

if TYPE_CHECKING:
    from collections.abc import Generator, Sequence

# One factor of a product expression such as ``rho*g^2/r^4``.
_FACTOR_RE: Final = re.compile(r"([A-Za-z_][A-Za-z_0-9]*)(?:\^(-?\d+(?:\.\d+)?))?")
_SEPARATOR_RE: Final = re.compile(r"\s*([*/])\s*")

T = TypeVar("T")


def _chunks(lst: Sequence[T], n: int) -> Generator[Sequence[T], None, None]:
    """Yield successive n-sized chunks from a list."""
    for i in range(0, len(lst), n):
        yield lst[i : i + n]


def theta_grid(n: int) -> np.ndarray:
    """Uniform angle nodes on [0, pi] used for the clustered radial grid."""
    if n < 3:
        raise DomainError(f"Grid needs at least 3 nodes, got {n}")
    return np.linspace(0.0, np.pi, n)


def clustered_radii(radius: float, n: int) -> np.ndarray:
    """Chebyshev-Lobatto radii r = R(1 - cos theta)/2, dense at both ends.

    Args:
        radius: Outer radius R.
        n: Number of nodes including both endpoints.

    Returns:
        Strictly increasing radii with r[0] = 0 and r[-1] = R.
    """
    r = 0.5 * radius * (1.0 - np.cos(theta_grid(n)))
    r[0] = 0.0
    r[-1] = radius
    return r


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights for the nodes returned by ``clustered_radii``.

    The weights integrate over [-1, 1]; multiply by R/2 for [0, R].

    Args:
        n: Number of nodes.

    Returns:
        Positive weights ordered like the ascending radii.
    """
    big_n = n - 1
    theta = np.pi * np.arange(n) / big_n
    w = np.zeros(n)
    inner = theta[1:-1]
    v = np.ones(big_n - 1)
    if big_n % 2 == 0:
        w[0] = w[-1] = 1.0 / (big_n**2 - 1)
        for k in range(1, big_n // 2):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
        v -= np.cos(big_n * inner) / (big_n**2 - 1)
    else:
        w[0] = w[-1] = 1.0 / big_n**2
        for k in range(1, (big_n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / big_n
    # cos(theta) runs from +1 to -1 while r ascends; the weights are symmetric.
    return w


def radial_weights(radius: float, n: int) -> np.ndarray:
    """Clenshaw-Curtis weights for integrals over [0, R] on ``clustered_radii``."""
    return 0.5 * radius * clenshaw_curtis_weights(n)


def cumulative_radial(values: np.ndarray, radius: float) -> np.ndarray:
    """Cumulative integral from 0 of samples on ``clustered_radii``.

    Integrates in the angle variable, where dr/dtheta = R sin(theta)/2 tames
    integrable endpoint singularities.

    Args:
        values: Integrand sampled on the clustered grid.
        radius: Outer radius R.

    Returns:
        Array F with F[0] = 0 and F[k] = integral of values over [0, r_k].
    """
    theta = theta_grid(len(values))
    jac = 0.5 * radius * np.sin(theta)
    integrand = np.where(jac > 0.0, values * jac, 0.0)
    integrand = np.nan_to_num(integrand, nan=0.0, posinf=0.0, neginf=0.0)
    return cumulative_simpson(integrand, x=theta, initial=0.0)


def rational_approximation(
    value: float, max_denominator: int = 64, tol: float = 1e-12,
) -> tuple[int, int, bool]:
    """Continued-fraction approximation N/D of a real number.

    Args:
        value: Number to approximate.
        max_denominator: Largest admissible denominator D.
        tol: Threshold on |value - N/D| for declaring the value rational.

    Returns:
        Tuple (N, D, exact) with N/D in lowest terms.
    """
    frac = Fraction(value).limit_denominator(max_denominator)
    exact = abs(value - frac.numerator / frac.denominator) < tol
    return frac.numerator, frac.denominator, exact


def log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """Logarithmically spaced points from lo to hi inclusive."""
    if lo <= 0.0 or hi <= lo:
        raise DomainError(f"Invalid log window [{lo}, {hi}]")
    return np.geomspace(lo, hi, n)


def even_polyfit(
    r: np.ndarray, values: np.ndarray, degree: int,
) -> tuple[np.ndarray, float]:
    """Least-squares fit of values by a polynomial in r**2.

    Args:
        r: Sample radii (near the center).
        values: Samples to fit.
        degree: Highest power of r**2.

    Returns:
        Tuple (coefficients in increasing powers of r**2, relative max residual).
    """
    z = np.asarray(r) ** 2
    design = np.vander(z, degree + 1, increasing=True)
    coeffs, *_ = np.linalg.lstsq(design, values, rcond=None)
    scale = max(np.max(np.abs(values)), np.finfo(float).tiny)
    residual = float(np.max(np.abs(design @ coeffs - values)) / scale)
    return coeffs, residual


def parse_product(expression: str) -> list[tuple[str, float]]:
    """Parse a product expression into (field name, power) factors.

    Accepts ``*`` and ``/`` between factors and ``^`` for integer or decimal
    powers, e.g. ``"rho*g^2/r^4"`` -> ``[("rho", 1), ("g", 2), ("r", -4)]``.

    Args:
        expression: Product expression over named fields.

    Returns:
        List of (name, power) tuples in order of appearance.

    Raises:
        DomainError: If the expression is malformed.
    """
    text = expression.strip()
    if not text:
        raise DomainError("Empty product expression")
    factors: list[tuple[str, float]] = []
    sign = 1.0
    pos = 0
    while pos < len(text):
        match = _FACTOR_RE.match(text, pos)
        if match is None:
            raise DomainError(f"Cannot parse factor at {text[pos:]!r}")
        power = float(match.group(2)) if match.group(2) else 1.0
        factors.append((match.group(1), sign * power))
        pos = match.end()
        if pos == len(text):
            break
        sep = _SEPARATOR_RE.match(text, pos)
        if sep is None:
            raise DomainError(f"Expected '*' or '/' at {text[pos:]!r}")
        sign = -1.0 if sep.group(1) == "/" else 1.0
        pos = sep.end()
    return factors
