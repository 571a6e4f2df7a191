"""Tests for the nonradial reduction, its Liouville problems and mode fields.

Spectra that need full fixed-point searches live in tests/integration.
"""
import numpy as np
import pytest

from conftest import smooth_function
from stellar_modes.errors import (
    DomainError,
    GModeAssumptionViolated,
    NoRootInWindow,
    TransformError,
)
from stellar_modes.nonradial import (
    ModeResult,
    check_B_conditions,
    check_gmode_assumption,
    displacement_fields,
    divergence_free_field,
    fixed_point_eigenvalues,
    g_mode_envelope,
    gmode_endpoint_strengths,
    gmode_problem,
    gough_system_coeffs,
    kernel_probe,
    operator_residual,
    pmode_endpoint_strengths,
    pmode_problem,
    quadratic_form,
    quadratic_form_terms,
    radial_derivative,
    reconstruct_mode,
    reduced_coeffs,
    u_field,
)
from stellar_modes.profiles import lambda0_default


def _bump(r, radius, center=0.5, width=0.3):
    """Smooth field vanishing outside center +- width/2 (in units of R)."""
    lo, hi = (center - width / 2) * radius, (center + width / 2) * radius
    inside = (r > lo) & (r < hi)
    return np.where(inside, np.sin(np.pi * (r - lo) / (hi - lo)) ** 4, 0.0)


class TestRadialDerivative:
    def test_polynomial(self, isentropic_star):
        r = isentropic_star.grid_r
        d = radial_derivative(r**3, isentropic_star.radius_R)
        np.testing.assert_allclose(d, 3.0 * r**2, atol=1e-6)


class TestGoughSystem:
    """First-order (xi, eta) system."""

    def test_trace_identity(self, stratified_star):
        lam = 0.5 * lambda0_default(stratified_star, 2)
        coeffs = gough_system_coeffs(stratified_star, 2, lam)
        r = coeffs.r[1:]
        np.testing.assert_allclose(coeffs.A11[1:] + coeffs.A22[1:], 2.0 / r, rtol=1e-12)
        assert np.isnan(coeffs.A11[0])
        assert coeffs.L == pytest.approx(6.0 / lam)
        assert not np.any(coeffs.A10)

    def test_requires_positive_lambda(self, stratified_star):
        with pytest.raises(DomainError):
            gough_system_coeffs(stratified_star, 2, 0.0)


class TestReducedCoefficients:
    """Weights and endpoint strengths of the reduced equation."""

    def test_gmode_weight_positive(self, stratified_star):
        coeffs = reduced_coeffs(
            stratified_star, 2, 0.3 * lambda0_default(stratified_star, 2), cowling=True,
        )
        assert np.all(coeffs.kappa > 0.0)
        assert coeffs.branch == "g"
        assert coeffs.grav_pert == 0.0
        np.testing.assert_allclose(coeffs.B, coeffs.kappa / coeffs.lam + coeffs.B0)

    def test_neutral_star_has_no_weight(self, isentropic_star):
        with pytest.raises(TransformError):
            reduced_coeffs(isentropic_star, 2, 0.0, cowling=True)

    def test_endpoint_strengths(self, isentropic_star):
        assert gmode_endpoint_strengths(isentropic_star, 2) == (6.0, 2.0)
        assert pmode_endpoint_strengths(isentropic_star, 2) == (6.0, pytest.approx(8.75))


class TestLiouvilleProblems:
    """g and p problems at a fixed parameter."""

    def test_gmode_needs_stratification(self, isentropic_star):
        with pytest.raises(GModeAssumptionViolated):
            check_gmode_assumption(isentropic_star)
        with pytest.raises(GModeAssumptionViolated):
            gmode_problem(isentropic_star, 1, 0.0)

    def test_stratified_assumption_value(self, stratified_star):
        assert check_gmode_assumption(stratified_star) > 0.0

    def test_gmode_problem_cowling(self, stratified_star):
        lam = 0.5 * lambda0_default(stratified_star, 1)
        problem = gmode_problem(stratified_star, 1, lam, cowling=True)
        assert np.isfinite(problem.x_plus)
        assert problem.perturbation is None
        assert problem.k_left == 2.0

    def test_gmode_problem_with_gravity(self, stratified_star):
        lam = 0.5 * lambda0_default(stratified_star, 1)
        assert gmode_problem(stratified_star, 1, lam).perturbation is not None

    def test_pmode_problem_at_zero_mu(self, isentropic_star):
        """The p-branch forcing vanishes at mu = 0 even with gravity."""
        problem = pmode_problem(isentropic_star, 2, 0.0)
        assert problem.perturbation is None
        assert problem.k_right == pytest.approx(8.75)

    def test_unknown_branch(self, stratified_star):
        with pytest.raises(DomainError):
            fixed_point_eigenvalues(stratified_star, 1, "f", (1, 1))

    def test_no_root_in_tiny_window(self, isentropic_star):
        with pytest.raises(NoRootInWindow) as info:
            fixed_point_eigenvalues(
                isentropic_star, 2, "p", (1, 1), cowling=True,
                window=(1e-9, 2e-9), scan_points=3, with_fields=False,
            )
        assert info.value.diagnostics["branch"] == "p"


class TestConditions:
    def test_report_fields(self, stratified_star):
        report = check_B_conditions(stratified_star, 2)
        data = report.to_dict()
        assert data["lambda0_used"] == pytest.approx(lambda0_default(stratified_star, 2))
        for key in ("delta_G", "delta_B0", "delta_B1", "epsilon_B"):
            assert np.isfinite(data[key])
        assert data["passed"] == report.passed

    def test_envelope(self, stratified_star):
        envelope = g_mode_envelope(stratified_star, 2, 2)
        assert envelope.shape == (2,)
        assert np.all(envelope > 0.0)


class TestModeFields:
    """Eulerian perturbations from displacements."""

    def test_translation_density(self, isentropic_star):
        """Uniform l = 1 translation gives drho = -rho'."""
        ones = np.ones_like(isentropic_star.grid_r)
        fields = displacement_fields(ones, ones, isentropic_star, 1)
        f = isentropic_star.fields
        body = slice(1, -1)
        np.testing.assert_allclose(fields.drho[body], -f.drho[body], atol=1e-8)

    def test_translation_is_in_kernel(self, isentropic_star):
        ones = np.ones_like(isentropic_star.grid_r)
        fields = displacement_fields(ones, ones, isentropic_star, 1)
        assert operator_residual(fields, isentropic_star, 1, 0.0).relative < 1e-4

    def test_divergence_free_field(self, isentropic_star):
        fields = divergence_free_field(isentropic_star, 2)
        scale = np.max(np.abs(isentropic_star.rho * fields.Vr))
        assert np.max(np.abs(fields.drho)) / scale < 1e-3
        assert np.max(np.abs(fields.dP)) / np.max(np.abs(isentropic_star.P * fields.Vr)) < 1e-3

    def test_reconstruct_requires_lambda(self, isentropic_star):
        zeros = np.zeros_like(isentropic_star.grid_r)
        with pytest.raises(DomainError):
            reconstruct_mode(zeros, zeros, zeros, isentropic_star, 2, 0.0)

    def test_reconstruct_pressure(self, stratified_star):
        r = stratified_star.grid_r
        xi = _bump(r, stratified_star.radius_R)
        eta = 0.1 * _bump(r, stratified_star.radius_R, center=0.4)
        mode = reconstruct_mode(xi, eta, np.zeros_like(r), stratified_star, 2, 1.0)
        f = stratified_star.fields
        np.testing.assert_allclose(mode.dP, eta + f.rho * f.g * xi)
        assert mode.diagnostics["mass_norm"] > 0.0
        assert mode.xi is mode.Vr


class TestQuadraticForm:
    """Hermitian form of the operator."""

    def test_u_forms_agree(self, stratified_star):
        r = stratified_star.grid_r
        radius = stratified_star.radius_R
        vr = _bump(r, radius)
        vh = _bump(r, radius, center=0.45)
        divergence = u_field(vr, vh, stratified_star, 2)
        pressure = u_field(vr, vh, stratified_star, 2, form="pressure")
        body = (r > 0.1 * radius) & (r < 0.9 * radius)
        scale = np.max(np.abs(divergence))
        assert np.max(np.abs(divergence[body] - pressure[body])) / scale < 1e-5

    def test_hermitian(self, stratified_star):
        r = stratified_star.grid_r
        radius = stratified_star.radius_R
        v1 = (_bump(r, radius), 0.5 * _bump(r, radius, center=0.55))
        v2 = (
            smooth_function(r, radius, seed=2) * _bump(r, radius, width=0.6),
            1j * _bump(r, radius, center=0.4),
        )
        forward = quadratic_form(v1, v2, stratified_star, 2)
        backward = quadratic_form(v2, v1, stratified_star, 2)
        assert abs(forward - np.conj(backward)) <= 1e-10 * abs(forward)

    def test_cowling_drops_gravity(self, stratified_star):
        r = stratified_star.grid_r
        v = (_bump(r, stratified_star.radius_R), np.zeros_like(r))
        terms = quadratic_form_terms(v, v, stratified_star, 2, grav_pert=0.0)
        assert terms.gravity == 0.0
        assert terms.kinetic.real > 0.0
        assert terms.total == terms.kinetic + terms.buoyancy


class TestKernelProbe:
    def test_translation_mode(self, isentropic_star):
        rows = kernel_probe(isentropic_star, 1, resolutions=(8,))
        assert rows[0]["relative_smallest"] < 1e-2
        assert rows[0]["translation_cosine"] > 0.9


class TestModeResult:
    def test_row(self):
        mode = ModeResult(
            l=2, branch="p", n=1, lam=3.5, x_plus=1.2, consistency=1e-12,
            roots=(3.5, 4.0), flags=("multiple_roots",),
        )
        row = mode.to_row()
        assert row["lambda"] == 3.5
        assert row["multiplicity"] == 2
        assert row["flags"] == "multiple_roots"
        assert row["formulation"] == "gough"
        assert "delta_G" not in row


class TestCowlingShiftReport:
    def test_rows(self, monkeypatch):
        """Shift rows compare the Cowling and full eigenvalue of each degree."""
        import stellar_modes.nonradial as nonradial

        def fake(star, l, branch, n_range, cowling, tolerances, with_fields):
            lam = (10.0 if cowling else 8.0) * l
            return [ModeResult(l=l, branch=branch, n=n_range[0], lam=lam, x_plus=1.0, consistency=0.0)]

        monkeypatch.setattr(nonradial, "fixed_point_eigenvalues", fake)
        rows = nonradial.cowling_shift_report(object(), [1, 2], 1)
        assert [row["l"] for row in rows] == [1, 2]
        assert rows[1]["lambda_full"] == 16.0
        assert rows[1]["relative_shift"] == pytest.approx(0.25)
        assert rows[1]["scaled_shift"] == pytest.approx(1.25)
