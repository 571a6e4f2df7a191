"""Tests for the self-gravity operator and the coupled potential solve."""
import numpy as np
import pytest

from conftest import smooth_function
from stellar_modes.errors import DomainError, GravityCouplingTooStrong
from stellar_modes.gravity import (
    HlOperator,
    apply_Hl,
    apply_Hl_dot,
    check_condition_G,
    coupling_coefficients,
    delta_phi_residual,
    hl_of_one,
    hl_ode_residual,
    solve_delta_phi,
)
from stellar_modes.profiles import gough_factors, lambda0_default, mu0_default, pmode_factors

# Weak perturbation coupling keeps delta_G well inside the contraction range.
WEAK_G = 0.02


def _relative_error(actual, expected):
    return float(np.max(np.abs(actual - expected)) / np.max(np.abs(expected)))


class TestHlOperator:
    """Quadrature realizations of H_l."""

    @pytest.mark.parametrize("l, tol", [(0, 1e-6), (1, 1e-6), (2, 1e-4), (3, 1e-4)])
    def test_constant_source(self, isentropic_star, l, tol):
        r = isentropic_star.grid_r
        h = apply_Hl(np.ones_like(r), l, isentropic_star)
        assert _relative_error(h, hl_of_one(r, isentropic_star.radius_R, l)) < tol

    def test_dot_of_constant_source(self, isentropic_star):
        """r d/dr (R^2/2 - r^2/6) = -r^2/3."""
        r = isentropic_star.grid_r
        hdot = apply_Hl_dot(np.ones_like(r), 0, isentropic_star)
        assert _relative_error(hdot, -(r**2) / 3.0) < 1e-6

    @pytest.mark.parametrize("l", [0, 1])
    def test_ode_identity(self, isentropic_star, l):
        f = smooth_function(isentropic_star.grid_r, isentropic_star.radius_R, seed=3)
        assert hl_ode_residual(f, l, isentropic_star) < 1e-5

    def test_negative_degree(self, isentropic_star):
        with pytest.raises(DomainError):
            HlOperator.for_star(isentropic_star, -1)

    def test_matrix_matches_apply(self, isentropic_star):
        op = HlOperator.for_star(isentropic_star, 2)
        f = smooth_function(isentropic_star.grid_r, isentropic_star.radius_R, seed=5)
        np.testing.assert_allclose(op.matrix @ f, op.apply(f), atol=1e-10)

    def test_trailing_axes(self, isentropic_star):
        """Columns are transformed independently."""
        op = HlOperator.for_star(isentropic_star, 1)
        r = isentropic_star.grid_r
        stacked = np.column_stack([np.ones_like(r), r**2])
        out = op.apply(stacked)
        np.testing.assert_allclose(out[:, 0], op.apply(np.ones_like(r)))
        np.testing.assert_allclose(out[:, 1], op.apply(r**2))


class TestExterior:
    """H_l f = C r^-(l+1) outside the star."""

    def test_continuous_at_surface(self, isentropic_star):
        op = HlOperator.for_star(isentropic_star, 2)
        f = isentropic_star.rho
        values, dots = op.exterior(f, np.array([isentropic_star.radius_R]))
        assert values[0] == pytest.approx(op.apply(f)[-1], rel=1e-10)
        assert dots[0] == pytest.approx(-3.0 * values[0])

    def test_rejects_interior_radius(self, isentropic_star):
        op = HlOperator.for_star(isentropic_star, 1)
        with pytest.raises(DomainError):
            op.exterior(isentropic_star.rho, np.array([0.5 * isentropic_star.radius_R]))


class TestNystrom:
    """Symmetric kernel realization used for energies."""

    def test_weighted_matrix_symmetric(self, isentropic_star):
        op = HlOperator.for_star(isentropic_star, 2)
        weighted = op.weights[:, None] * op.nystrom_matrix
        scale = np.max(np.abs(weighted))
        assert np.max(np.abs(weighted - weighted.T)) / scale < 1e-12

    def test_constant_row_sums(self, isentropic_star):
        op = HlOperator.for_star(isentropic_star, 1)
        r = isentropic_star.grid_r
        np.testing.assert_allclose(
            op.nystrom_matrix @ np.ones_like(r), hl_of_one(r, isentropic_star.radius_R, 1),
            atol=1e-12,
        )

    def test_energy_positive_and_consistent(self, isentropic_star):
        op = HlOperator.for_star(isentropic_star, 1)
        f = smooth_function(isentropic_star.grid_r, isentropic_star.radius_R, seed=11)
        energy = op.gravitational_energy(f, f)
        direct = float(np.sum(op.weights * op.apply(f) * f))
        assert energy > 0.0
        assert energy == pytest.approx(direct, rel=1e-3)


class TestCoupledPotential:
    """X = 4 pi G H_l[alpha X + beta X-dot + Y]."""

    @pytest.fixture()
    def weak_aux(self, stratified_star):
        lam = 0.2 * lambda0_default(stratified_star, 2)
        return lam, gough_factors(stratified_star, 2, lam, grav_pert=WEAK_G)

    def test_condition_below_threshold(self, stratified_star, weak_aux, tolerances):
        lam, aux = weak_aux
        assert check_condition_G(stratified_star, 2, lam, aux) < tolerances.delta_G

    def test_dense_and_neumann_agree(self, stratified_star, weak_aux):
        lam, aux = weak_aux
        y = smooth_function(stratified_star.grid_r, stratified_star.radius_R, seed=7)
        solution = solve_delta_phi(y, stratified_star, 2, lam, aux, method="both")
        assert solution.method == "dense"
        assert not solution.neumann_fallback
        assert solution.agreement < 1e-6
        assert delta_phi_residual(solution, y, stratified_star, 2, lam, aux) < 1e-8

    def test_neumann_only(self, stratified_star, weak_aux):
        lam, aux = weak_aux
        y = np.ones_like(stratified_star.grid_r)
        solution = solve_delta_phi(y, stratified_star, 2, lam, aux, method="neumann")
        assert solution.method == "neumann"
        assert solution.iterations > 1
        assert delta_phi_residual(solution, y, stratified_star, 2, lam, aux) < 1e-6

    def test_cowling_returns_zero(self, stratified_star):
        aux = gough_factors(stratified_star, 1, 0.0, grav_pert=0.0)
        y = np.ones_like(stratified_star.grid_r)
        solution = solve_delta_phi(y, stratified_star, 1, 0.0, aux)
        assert solution.method == "cowling"
        assert not np.any(solution.X)
        assert check_condition_G(stratified_star, 1, 0.0, aux) == 0.0

    def test_strong_coupling_raises(self, stratified_star):
        aux = gough_factors(stratified_star, 1, 0.0)
        y = np.ones_like(stratified_star.grid_r)
        with pytest.raises(GravityCouplingTooStrong) as info:
            solve_delta_phi(y, stratified_star, 1, 0.0, aux)
        assert info.value.diagnostics["delta_G"] > 0.5

    def test_alpha_at_zero_lambda(self, stratified_star):
        """E = 1 at lambda = 0, so alpha = -rho'/g and beta = 0."""
        aux = gough_factors(stratified_star, 2, 0.0)
        coeffs = coupling_coefficients(stratified_star, 2, 0.0, aux)
        f = stratified_star.fields
        body = slice(1, -1)
        np.testing.assert_allclose(coeffs.alpha[body], -f.drho[body] / f.g[body], rtol=1e-10)
        assert coeffs.alpha[0] == pytest.approx(stratified_star.rho_O1 / stratified_star.g_O)
        assert not np.any(coeffs.beta)

    def test_pmode_reduction_supplies_e(self, stratified_star):
        """Above the g-mode range E is recovered from Ep and is negative."""
        mu = 0.5 * mu0_default(stratified_star, 2)
        aux = pmode_factors(stratified_star, 2, mu)
        coeffs = coupling_coefficients(stratified_star, 2, 1.0 / mu, aux)
        assert np.all(np.isfinite(coeffs.alpha[1:-1]))
        assert np.all(coeffs.alpha[1:-1] <= 0.0)
