"""Singular Sturm-Liouville problems in Liouville normal form.

Problems read -y'' + q(x) y + f(y) = Lambda y on (0, x_plus), where q
carries inverse-square singularities K_left/x^2 and K_right/(x_plus-x)^2
and f is an optional compact perturbation. Eigenvalues come from a
Richardson-extrapolated finite-difference matrix and are refined by Prufer
shooting when there is no perturbation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import CubicSpline, make_interp_spline
from scipy.linalg import eig, eigh_tridiagonal, solve_banded

from stellar_modes.config import Tolerances
from stellar_modes.errors import DomainError, FormulationMismatch, TransformError

if TYPE_CHECKING:
    from collections.abc import Callable

logger = logging.getLogger(__name__)

_PERTURBED_LEVELS = (100, 200, 400)


def indicial_exponent(strength: float) -> float:
    """Regular exponent 1/2 (1 + sqrt(1 + 4K)) of y ~ x^alpha at an endpoint."""
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * strength))


@dataclass(frozen=True)
class LiouvilleProblem:
    """-y'' + q y + f(y) = Lambda y on (0, x_plus) with limit-point endpoints."""

    x_plus: float
    k_left: float
    k_right: float
    q_eval: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    perturbation: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    weight_shift: float = 0.0
    label: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x_plus) and self.x_plus > 0.0):
            raise TransformError(f"x_plus must be finite and positive, got {self.x_plus}")

    @classmethod
    def from_potential(
        cls,
        q: Callable[[np.ndarray], np.ndarray],
        x_plus: float,
        k_left: float,
        k_right: float,
        perturbation: Callable[[np.ndarray], np.ndarray] | None = None,
        label: str = "",
    ) -> LiouvilleProblem:
        """Problem from an analytic potential including its singular parts."""
        shift = _weight_shift(q, x_plus, k_left, k_right)
        return cls(x_plus, k_left, k_right, q, perturbation, shift, label)

    @classmethod
    def from_samples(
        cls,
        x: np.ndarray,
        q: np.ndarray,
        x_plus: float,
        k_left: float,
        k_right: float,
        perturbation: Callable[[np.ndarray], np.ndarray] | None = None,
        label: str = "",
    ) -> LiouvilleProblem:
        """Problem from sampled q on interior points of (0, x_plus).

        Interpolates the regularized product q x^2 (x_plus - x)^2 with its
        endpoint values pinned to K x_plus^2, so the singular strengths are
        exact.
        """
        x = np.asarray(x, dtype=float)
        q = np.asarray(q, dtype=float)
        keep = np.isfinite(q) & (x > 0.0) & (x < x_plus)
        xs = np.concatenate([[0.0], x[keep], [x_plus]])
        regular = q[keep] * x[keep] ** 2 * (x_plus - x[keep]) ** 2
        values = np.concatenate([[k_left * x_plus**2], regular, [k_right * x_plus**2]])
        order = np.argsort(xs)
        xs, values = xs[order], values[order]
        unique = np.concatenate([[True], np.diff(xs) > 0.0])
        spline = CubicSpline(xs[unique], values[unique])

        def q_eval(points: np.ndarray) -> np.ndarray:
            points = np.asarray(points, dtype=float)
            return spline(points) / (points**2 * (x_plus - points) ** 2)

        shift = _weight_shift(q_eval, x_plus, k_left, k_right)
        return cls(x_plus, k_left, k_right, q_eval, perturbation, shift, label)

    @property
    def alpha_left(self) -> float:
        return indicial_exponent(self.k_left)

    @property
    def alpha_right(self) -> float:
        return indicial_exponent(self.k_right)

    def regular_part(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.q_eval(x) - self.k_left / x**2 - self.k_right / (self.x_plus - x) ** 2

    def shifted(self, amount: float) -> LiouvilleProblem:
        """Same problem with q + amount."""
        base = self.q_eval
        return LiouvilleProblem(
            self.x_plus, self.k_left, self.k_right, lambda x: base(x) + amount,
            self.perturbation, max(0.0, self.weight_shift - amount), self.label,
        )


def _weight_shift(q: Callable, x_plus: float, k_left: float, k_right: float) -> float:
    x = np.linspace(0.0, x_plus, 2001)[1:-1]
    regular = q(x) - k_left / x**2 - k_right / (x_plus - x) ** 2
    return float(max(0.0, 1.0 - np.min(regular)))


@dataclass(frozen=True)
class LiouvilleMap:
    """Result of a Liouville transformation on a radial grid."""

    r: np.ndarray
    x: np.ndarray
    x_plus: float
    m: np.ndarray
    q: np.ndarray

    def to_y(self, psi: np.ndarray) -> np.ndarray:
        return self.m * psi

    def to_psi(self, y: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.m > 0.0, y / self.m, 0.0)


def liouville_transform(
    a: np.ndarray,
    c: np.ndarray,
    q00: np.ndarray,
    r: np.ndarray,
    dlog_a: np.ndarray | None = None,
    dlog_c: np.ndarray | None = None,
    ddlog_ac: np.ndarray | None = None,
    x: np.ndarray | None = None,
) -> LiouvilleMap:
    """Transform -(a psi')' + c q00 psi = lambda c psi to normal form.

    Uses x = int sqrt(c/a) dr and y = (ac)^(1/4) psi, giving
    q = q00 + (a/4c)[L'' - L'^2/4 + (log a)' L'] with L = log(ac).
    Log-derivatives may be supplied analytically; otherwise they come from
    quintic splines of log a and log c.

    Args:
        a, c, q00: Samples on ``r`` (a, c > 0 on the open interval).
        r: Increasing radii.
        dlog_a, dlog_c, ddlog_ac: Optional analytic (log a)', (log c)', L''.
        x: Optional precomputed x(r).

    Returns:
        LiouvilleMap with q on the interior (endpoint samples are nan).

    Raises:
        TransformError: If a or c is not positive inside or x_plus diverges.
    """
    a, c, r = (np.asarray(v, dtype=float) for v in (a, c, r))
    inner = slice(1, -1)
    if np.any(a[inner] <= 0.0) or np.any(c[inner] <= 0.0):
        raise TransformError("Liouville transform needs a, c > 0 on the open interval")
    if x is None:
        speed = np.zeros_like(r)
        speed[inner] = np.sqrt(c[inner] / a[inner])
        # c/a may be singular at the ends; hold the adjacent value.
        speed[0], speed[-1] = speed[1], speed[-2]
        x =cumulative_simpson(speed, x=r, initial=0.0)
    x_plus = float(x[-1])
    if not math.isfinite(x_plus) or x_plus <= 0.0:
        raise TransformError(f"Transformed interval is not finite: x_plus={x_plus}")

    if dlog_a is None or dlog_c is None or ddlog_ac is None:
        rr = r[inner]
        spline_a = make_interp_spline(rr, np.log(a[inner]), k=5)
        spline_c = make_interp_spline(rr, np.log(c[inner]), k=5)
        dlog_a = np.full_like(r, np.nan)
        dlog_c = np.full_like(r, np.nan)
        ddlog_ac = np.full_like(r, np.nan)
        dlog_a[inner] = spline_a.derivative()(rr)
        dlog_c[inner] = spline_c.derivative()(rr)
        ddlog_ac[inner] = spline_a.derivative(2)(rr) + spline_c.derivative(2)(rr)

    dL = dlog_a + dlog_c
    with np.errstate(divide="ignore", invalid="ignore"):
        q = q00 + a / (4.0 * c) * (ddlog_ac - 0.25 * dL**2 + dlog_a * dL)
        m = (a * c) ** 0.25
    q = q.copy()
    q[0] = q[-1] = np.nan
    return LiouvilleMap(r=r, x=np.asarray(x), x_plus=x_plus, m=m, q=q)


# ---------------------------------------------------------------------------
# Eigenvalues
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumSlice:
    """Lowest eigenvalues of a LiouvilleProblem with per-level diagnostics."""

    problem: LiouvilleProblem = field(repr=False)
    eigenvalues: np.ndarray
    levels: tuple[np.ndarray, ...] = field(repr=False)
    shooting: np.ndarray | None = None
    agreement: np.ndarray | None = None
    flags: tuple[str, ...] = ()

    @property
    def n_max(self) -> int:
        return len(self.eigenvalues)

    def to_dict(self) -> dict[str, Any]:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "agreement": None if self.agreement is None else self.agreement.tolist(),
            "flags": list(self.flags),
            "x_plus": self.problem.x_plus,
            "weight_shift": self.problem.weight_shift,
        }


def _uniform_mesh(x_plus: float, intervals: int) -> np.ndarray:
    return np.linspace(0.0, x_plus, intervals + 1)[1:-1]


def _tridiagonal(problem: LiouvilleProblem, intervals: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = _uniform_mesh(problem.x_plus, intervals)
    h = problem.x_plus / intervals
    diag = 2.0 / h**2 + problem.q_eval(x)
    off = np.full(len(x) - 1, -1.0 / h**2)
    return x, diag, off


def _graded_nodes(x_plus: float, x_eps: float, intervals: int) -> np.ndarray:
    """Nodes of [x_eps, x_plus - x_eps], quadratically clustered at both ends."""
    t = np.linspace(0.0, 1.0, intervals + 1)
    return x_eps + (x_plus - 2.0 * x_eps) * 0.5 * (1.0 - np.cos(math.pi * t))


def _graded_operator(
    problem: LiouvilleProblem, x_eps: float, intervals: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Symmetrized three-point operator with Dirichlet ends at x_eps and x_plus - x_eps.

    With lumped weights w the nodal operator W^-1 K + q is similar to the
    symmetric tridiagonal W^-1/2 K W^-1/2 + q returned here.
    """
    nodes = _graded_nodes(problem.x_plus, x_eps, intervals)
    h = np.diff(nodes)
    x = nodes[1:-1]
    w = 0.5 * (h[:-1] + h[1:])
    diag = (1.0 / h[:-1] + 1.0 / h[1:]) / w + problem.q_eval(x)
    off = -1.0 / (h[1:-1] * np.sqrt(w[:-1] * w[1:]))
    return x, w, diag, off


def _level_eigenvalues(problem: LiouvilleProblem, x_eps: float, intervals: int, n_max: int) -> np.ndarray:
    x, w, diag, off = _graded_operator(problem, x_eps, intervals)
    if problem.perturbation is None:
        return eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, n_max - 1))
    root_w = np.sqrt(w)
    matrix = (
        np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        + root_w[:, None] * problem.perturbation(x) / root_w[None, :]
    )
    values = np.sort(eig(matrix, right=False).real)
    return values[:n_max]


def _richardson(levels: tuple[np.ndarray, np.ndarray, np.ndarray]) -> np.ndarray:
    coarse, mid, fine = levels
    r1_coarse = (4.0 * mid - coarse) / 3.0
    r1_fine = (4.0 * fine - mid) / 3.0
    return (16.0 * r1_fine - r1_coarse) / 15.0


def sl_eigenvalues(
    problem: LiouvilleProblem,
    n_max: int,
    tolerances: Tolerances | None = None,
    strict: bool = False,
    shoot: bool = True,
) -> SpectrumSlice:
    """Lowest ``n_max`` eigenvalues of a singular Liouville problem.

    The matrix path works on a cosine-graded mesh of [x_eps, x_plus - x_eps]
    with Dirichlet ends, x_eps = tol.x_eps * x_plus, and extrapolates over
    the levels (x_eps, h), (x_eps/2, h/2), (x_eps/4, h/4). Truncation moves
    an eigenvalue by O(x_eps^(2 alpha - 1)) with alpha > 3/2 the indicial
    exponent, so the h^2 mesh error drives the extrapolation. Without a
    perturbation each value is refined by Prufer shooting, which fixes the
    index by the oscillation count.

    Args:
        problem: Problem in normal form.
        n_max: Number of eigenvalues.
        tolerances: Tolerances; uses x_eps and sl_agreement.
        strict: Raise on disagreement instead of flagging.
        shoot: Run the Prufer refinement when possible.

    Returns:
        SpectrumSlice with ascending eigenvalues.

    Raises:
        DomainError: If n_max < 1.
        FormulationMismatch: In strict mode, when the two paths disagree.
    """
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    tol = tolerances or Tolerances()
    if problem.perturbation is None:
        base = max(int(round(0.5 / tol.x_eps)), 4 * (n_max + 2))
        sizes = (base, 2 * base, 4 * base)
    else:
        sizes = _PERTURBED_LEVELS
    x_eps = tol.x_eps * problem.x_plus
    levels = tuple(
        _level_eigenvalues(problem, x_eps / 2**k, m, n_max) for k, m in enumerate(sizes)
    )
    values = _richardson(levels)
    logger.debug("Richardson levels %s from x_eps=%.3g for %s", sizes, x_eps, problem.label or "problem")

    flags: list[str] = []
    shooting = agreement = None
    if shoot and problem.perturbation is None:
        shooting = np.array([
            prufer_refine(problem, n + 1, values[n], tol) for n in range(n_max)
        ])
        agreement = np.abs(shooting - values) / np.maximum(np.abs(values), 1.0)
        bad = np.flatnonzero(agreement > tol.sl_agreement)
        if bad.size:
            message = (
                f"Matrix and shooting eigenvalues differ for n={(bad + 1).tolist()} "
                f"(max rel {agreement.max():.3g})"
            )
            if strict:
                raise FormulationMismatch(message, agreement=agreement, indices=(bad + 1).tolist())
            logger.warning(message)
            flags.append("formulation_mismatch")
        else:
            values = shooting
    if np.any(np.diff(values) <= 0.0):
        flags.append("near_degenerate")
    return SpectrumSlice(problem, values, levels, shooting, agreement, tuple(flags))


def _prufer_angle(problem: LiouvilleProblem, lam: float, x_mid: float, eps: float,
                  index: int) -> float:
    def rhs(x: float, theta: np.ndarray) -> list[float]:
        q = float(problem.q_eval(np.array([x]))[0])
        return [math.cos(theta[0]) ** 2 + (lam - q) * math.sin(theta[0]) ** 2]

    left0 = math.atan(eps / problem.alpha_left)
    right0 = index * math.pi - math.atan(eps / problem.alpha_right)
    left = solve_ivp(rhs, (eps, x_mid), [left0], method="DOP853", rtol=1e-11, atol=1e-12)
    right = solve_ivp(rhs, (problem.x_plus - eps, x_mid), [right0], method="DOP853",
                      rtol=1e-11, atol=1e-12)
    return float(left.y[0, -1] - right.y[0, -1])


def prufer_refine(
    problem: LiouvilleProblem, index: int, guess: float, tolerances: Tolerances | None = None,
) -> float:
    """Secant refinement of the ``index``-th eigenvalue by Prufer shooting.

    The left angle starts at atan(x_eps/alpha_left); the right angle ends at
    index*pi - atan(x_eps/alpha_right), so the match fixes the node count.
    """
    tol = tolerances or Tolerances()
    eps = tol.x_eps * problem.x_plus
    x_mid = 0.5 * problem.x_plus
    lam0, lam1 = guess, guess * (1.0 + 1e-6) + 1e-9
    f0 = _prufer_angle(problem, lam0, x_mid, eps, index)
    f1 = _prufer_angle(problem, lam1, x_mid, eps, index)
    for _ in range(30):
        if f1 == f0:
            break
        lam2 = lam1 - f1 * (lam1 - lam0) / (f1 - f0)
        lam0, f0 = lam1, f1
        lam1 = lam2
        f1 = _prufer_angle(problem, lam1, x_mid, eps, index)
        if abs(lam1 - lam0) <= 1e-12 * max(abs(lam1), 1.0):
            break
    return float(lam1)


# ---------------------------------------------------------------------------
# Eigenfunctions and quadratic forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenFunction:
    """Normalized eigenfunction on a uniform interior mesh."""

    x: np.ndarray
    y: np.ndarray
    eigenvalue: float
    rayleigh: float
    residual: float
    node_count: int
    exponent_left: float
    exponent_right: float
    ill_conditioned: bool


def _fit_exponent(x: np.ndarray, y: np.ndarray) -> float:
    keep = np.abs(y) > 0.0
    if np.count_nonzero(keep) < 3:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(np.abs(y[keep])), 1)[0])


def count_nodes(y: np.ndarray, floor: float = 1e-8) -> int:
    """Sign changes of y ignoring samples below floor * max|y|."""
    significant = y[np.abs(y) > floor * np.max(np.abs(y))]
    return int(np.count_nonzero(np.diff(np.sign(significant)) != 0))


def sl_eigenfunction(
    problem: LiouvilleProblem,
    eigenvalue: float,
    neighbors: tuple[float | None, float | None] | None = None,
    intervals: int | None = None,
    tolerances: Tolerances | None = None,
) -> EigenFunction:
    """Eigenfunction for an isolated eigenvalue by inverse iteration.

    Args:
        problem: Problem in normal form.
        eigenvalue: Target eigenvalue.
        neighbors: Adjacent eigenvalues (None where absent), used for the
            conditioning flag.
        intervals: Mesh intervals; defaults to 1/x_eps (or 400 when perturbed).
        tolerances: Tolerances; uses x_eps and eigen_gap.

    Returns:
        EigenFunction normalized in the discrete L^2 norm, positive near 0.
    """
    tol = tolerances or Tolerances()
    if intervals is None:
        intervals = _PERTURBED_LEVELS[-1] if problem.perturbation else int(round(1.0 / tol.x_eps))
    x, diag, off = _tridiagonal(problem, intervals)
    h = problem.x_plus / intervals
    shift = eigenvalue * (1.0 + 1e-10) + 1e-12

    if problem.perturbation is None:
        banded = np.zeros((3, len(x)))
        banded[0, 1:] = off
        banded[1] = diag - shift
        banded[2, :-1] = off

        def solve(rhs: np.ndarray) -> np.ndarray:
            return solve_banded((1, 1), banded, rhs)

        def apply(v: np.ndarray) -> np.ndarray:
            out = diag * v
            out[:-1] += off * v[1:]
            out[1:] += off * v[:-1]
            return out
    else:
        matrix = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1) + problem.perturbation(x)
        shifted = matrix - shift * np.eye(len(x))

        def solve(rhs: np.ndarray) -> np.ndarray:
            return np.linalg.solve(shifted, rhs)

        def apply(v: np.ndarray) -> np.ndarray:
            return matrix @ v

    rng = np.random.default_rng(0)
    y = rng.standard_normal(len(x))
    for _ in range(8):
        y = solve(y)
        y /= np.linalg.norm(y)
    y /= math.sqrt(h)
    first = np.flatnonzero(np.abs(y) > 1e-6 * np.max(np.abs(y)))[0]
    if y[first] < 0.0:
        y = -y

    ay = apply(y)
    rayleigh = float(h * np.dot(y, ay))
    residual = float(np.linalg.norm(ay - rayleigh * y) * math.sqrt(h) / max(abs(rayleigh), 1.0))

    ill = False
    others = [nb for nb in (neighbors or ()) if nb is not None]
    if others:
        gap = min(abs(eigenvalue - nb) for nb in others)
        ill = gap < tol.eigen_gap * max(abs(eigenvalue), 1.0)
        if ill:
            logger.warning("Eigenvalue %.10g is not isolated (gap %.3g)", eigenvalue, gap)

    window = 0.01 * problem.x_plus
    left = x <= window
    right = x >= problem.x_plus - window
    return EigenFunction(
        x=x,
        y=y,
        eigenvalue=eigenvalue,
        rayleigh=rayleigh,
        residual=residual,
        node_count=count_nodes(y),
        exponent_left=_fit_exponent(x[left], y[left]),
        exponent_right=_fit_exponent(problem.x_plus - x[right], y[right]),
        ill_conditioned=ill,
    )


def quadratic_form_q(problem: LiouvilleProblem, y: np.ndarray, x: np.ndarray) -> float:
    """Q0[y] = int |y'|^2 + (q + K0)|y|^2 dx for y vanishing at both ends.

    Args:
        problem: Problem supplying q and the weight shift K0.
        y: Samples on the uniform interior mesh ``x``.
        x: Uniform interior mesh.

    Returns:
        Quadrature value of the form.
    """
    h = x[1] - x[0]
    padded = np.concatenate([[0.0], y, [0.0]])
    slope = np.diff(padded) / h
    potential = (problem.q_eval(x) + problem.weight_shift) * np.abs(y) ** 2
    return float(h * np.sum(np.abs(slope) ** 2) + h * np.sum(potential))


def fem_eigenvalues(problem: LiouvilleProblem, n_max: int, nodes: int = 4000) -> np.ndarray:
    """Independent oracle: lumped linear finite elements on a cosine-graded mesh.

    Extrapolates the eigenvalues of ``nodes`` and ``2*nodes`` meshes.
    """
    def level(count: int) -> np.ndarray:
        t = np.linspace(0.0, np.pi, count + 1)
        x = 0.5 * problem.x_plus * (1.0 - np.cos(t))
        h = np.diff(x)
        inner = x[1:-1]
        mass = 0.5 * (h[:-1] + h[1:])
        stiff_diag = 1.0 / h[:-1] + 1.0 / h[1:]
        stiff_off = -1.0 / h[1:-1]
        scale = 1.0 / np.sqrt(mass)
        diag = stiff_diag * scale**2 + problem.q_eval(inner)
        off = stiff_off * scale[:-1] * scale[1:]
        return eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, n_max - 1))

    coarse = level(nodes)
    fine = level(2 * nodes)
    return (4.0 * fine - coarse) / 3.0
