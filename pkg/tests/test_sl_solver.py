"""Tests for the singular Sturm-Liouville solver.

The reference problem is -y'' + K/sin^2(x) y = Lambda y on (0, pi) with
K = 2, whose eigenvalues are (n + 2)^2 and whose ground state is sin^2(x).
"""
import math

import numpy as np
import pytest

from stellar_modes.errors import DomainError, FormulationMismatch, TransformError
from stellar_modes.sl_solver import (
    LiouvilleProblem,
    count_nodes,
    fem_eigenvalues,
    indicial_exponent,
    liouville_transform,
    prufer_refine,
    quadratic_form_q,
    sl_eigenfunction,
    sl_eigenvalues,
)

EXACT = np.array([4.0, 9.0, 16.0])


def _trig_potential(x):
    return 2.0 / np.sin(x) ** 2


@pytest.fixture(scope="module")
def problem():
    return LiouvilleProblem.from_potential(_trig_potential, math.pi, 2.0, 2.0, label="trig")


class TestIndicialExponent:
    @pytest.mark.parametrize("strength, expected", [(0.0, 1.0), (0.75, 1.5), (2.0, 2.0)])
    def test_values(self, strength, expected):
        assert indicial_exponent(strength) == pytest.approx(expected)


class TestLiouvilleProblem:
    """Construction and derived quantities."""

    def test_infinite_interval_rejected(self):
        with pytest.raises(TransformError):
            LiouvilleProblem(math.inf, 0.0, 0.0, _trig_potential)

    def test_weight_shift_makes_regular_part_positive(self, problem):
        x = np.linspace(0.1, math.pi - 0.1, 50)
        assert np.all(problem.regular_part(x) + problem.weight_shift >= 1.0 - 1e-9)

    def test_shifted_moves_spectrum(self, problem):
        values = sl_eigenvalues(problem.shifted(1.5), 2).eigenvalues
        np.testing.assert_allclose(values, EXACT[:2] + 1.5, rtol=1e-4)


class TestEigenvalues:
    """Matrix path, Prufer refinement and the finite-element oracle."""

    def test_matches_closed_form(self, problem):
        spectrum = sl_eigenvalues(problem, 3)
        np.testing.assert_allclose(spectrum.eigenvalues, EXACT, rtol=1e-4)
        assert "formulation_mismatch" not in spectrum.flags
        assert spectrum.n_max == 3

    def test_prufer_fixes_index(self, problem):
        assert prufer_refine(problem, 2, 8.7) == pytest.approx(9.0, rel=1e-6)

    def test_fem_oracle(self, problem):
        np.testing.assert_allclose(fem_eigenvalues(problem, 3, nodes=2000), EXACT, rtol=1e-3)

    def test_from_samples(self):
        x = np.linspace(0.0, math.pi, 801)[1:-1]
        sampled = LiouvilleProblem.from_samples(x, _trig_potential(x), math.pi, 2.0, 2.0)
        values = sl_eigenvalues(sampled, 2).eigenvalues
        np.testing.assert_allclose(values, EXACT[:2], rtol=1e-3)

    def test_compact_perturbation(self, problem):
        """A multiple of the identity shifts every eigenvalue."""
        perturbed = LiouvilleProblem(
            problem.x_plus, 2.0, 2.0, problem.q_eval,
            perturbation=lambda x: 0.5 * np.eye(len(x)),
            weight_shift=problem.weight_shift,
        )
        spectrum = sl_eigenvalues(perturbed, 2)
        assert spectrum.shooting is None
        np.testing.assert_allclose(spectrum.eigenvalues, EXACT[:2] + 0.5, rtol=1e-5)

    def test_rank_one_perturbation(self, problem):
        """Adding 3 phi<phi, .> on the normalized ground state lifts only that eigenvalue."""

        def phi(x):
            return np.sin(x) ** 2 / math.sqrt(3.0 * math.pi / 8.0)

        def rank_one(x):
            nodes = np.concatenate([[0.0], x, [math.pi]])
            weights = 0.5 * (nodes[2:] - nodes[:-2])
            return 3.0 * phi(x)[:, None] * (weights * phi(x))[None, :]

        perturbed = LiouvilleProblem(
            problem.x_plus, 2.0, 2.0, problem.q_eval, perturbation=rank_one,
            weight_shift=problem.weight_shift,
        )
        values = sl_eigenvalues(perturbed, 3).eigenvalues
        np.testing.assert_allclose(values, [7.0, 9.0, 16.0], rtol=1e-5)

    def test_matrix_path_alone(self, problem):
        """The graded, extrapolated matrix path is accurate before any shooting."""
        spectrum = sl_eigenvalues(problem, 3, shoot=False)
        assert spectrum.shooting is None
        np.testing.assert_allclose(spectrum.eigenvalues, EXACT, rtol=1e-6)
        coarse, mid, fine = spectrum.levels
        assert np.all(np.abs(fine - EXACT) < np.abs(coarse - EXACT))

    def test_invalid_count(self, problem):
        with pytest.raises(DomainError):
            sl_eigenvalues(problem, 0)

    def test_strict_mismatch(self, problem):
        """An impossible agreement threshold trips strict mode."""
        from stellar_modes.config import Tolerances

        with pytest.raises(FormulationMismatch):
            sl_eigenvalues(problem, 2, Tolerances(sl_agreement=0.0), strict=True)

    def test_to_dict(self, problem):
        data = sl_eigenvalues(problem, 1).to_dict()
        assert data["x_plus"] == pytest.approx(math.pi)
        assert len(data["eigenvalues"]) == 1


class TestEigenfunction:
    """Inverse iteration and endpoint behavior."""

    def test_ground_state(self, problem):
        ef = sl_eigenfunction(problem, 4.0, neighbors=(None, 9.0))
        assert ef.node_count == 0
        assert ef.rayleigh == pytest.approx(4.0, rel=1e-3)
        assert ef.residual < 1e-2
        assert ef.exponent_left == pytest.approx(2.0, abs=0.1)
        assert ef.exponent_right == pytest.approx(2.0, abs=0.1)
        assert not ef.ill_conditioned

    def test_matches_sine_squared(self, problem):
        ef = sl_eigenfunction(problem, 4.0)
        exact = np.sin(ef.x) ** 2
        exact /= math.sqrt(np.sum(exact**2) * (ef.x[1] - ef.x[0]))
        np.testing.assert_allclose(ef.y, exact, atol=1e-3)

    def test_excited_state_nodes(self, problem):
        assert sl_eigenfunction(problem, 16.0).node_count == 2

    def test_near_degenerate_flag(self, problem):
        ef = sl_eigenfunction(problem, 4.0, neighbors=(None, 4.0 + 1e-12))
        assert ef.ill_conditioned

    def test_quadratic_form(self, problem):
        """Q0[y] = Lambda + K0 for a normalized eigenfunction."""
        ef = sl_eigenfunction(problem, 9.0)
        value = quadratic_form_q(problem, ef.y, ef.x)
        assert value == pytest.approx(9.0 + problem.weight_shift, rel=1e-2)


class TestLiouvilleTransform:
    """Normal form of -(a psi')' + c q00 psi = lambda c psi."""

    def test_constant_coefficients(self):
        r = np.linspace(0.0, 2.0, 201)
        ones = np.ones_like(r)
        result = liouville_transform(ones, ones, np.zeros_like(r), r)
        assert result.x_plus == pytest.approx(2.0)
        np.testing.assert_allclose(result.q[1:-1], 0.0, atol=1e-8)
        assert np.isnan(result.q[0])
        np.testing.assert_allclose(result.to_psi(result.to_y(r)), r)

    def test_travel_time(self):
        """x = int sqrt(c/a) dr for c/a = 4."""
        r = np.linspace(0.0, 1.0, 101)
        result = liouville_transform(np.ones_like(r), 4.0 * np.ones_like(r), np.zeros_like(r), r)
        assert result.x_plus == pytest.approx(2.0, rel=1e-10)

    def test_nonpositive_coefficient(self):
        r = np.linspace(0.0, 1.0, 11)
        a = np.ones_like(r)
        a[5] = -1.0
        with pytest.raises(TransformError):
            liouville_transform(a, np.ones_like(r), np.zeros_like(r), r)


def test_count_nodes_ignores_noise():
    """Tiny sign flips below the floor are not nodes."""
    y = np.array([1.0, 0.5, 1e-12, -1e-12, 0.4, -0.3, -1.0])
    assert count_nodes(y) == 1
