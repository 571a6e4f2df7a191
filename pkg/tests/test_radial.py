"""Tests for the radial pulsation spectrum."""
import numpy as np
import pytest

from stellar_modes.radial import (
    measured_endpoint_strengths,
    radial_dense_oracle,
    radial_endpoint_strengths,
    radial_liouville,
    radial_q00,
    radial_spectrum,
    rayleigh_lower_bound,
)


@pytest.fixture(scope="module")
def spectrum(isentropic_star):
    return radial_spectrum(isentropic_star, 3)


class TestQ00:
    """Cancellation-safe and textbook forms of the potential."""

    def test_forms_agree_in_the_interior(self, stratified_star):
        r = np.linspace(0.2, 0.8, 25) * stratified_star.radius_R
        safe = radial_q00(stratified_star, r)
        naive = radial_q00(stratified_star, r, form="naive")
        np.testing.assert_allclose(safe, naive, rtol=1e-6)

    def test_safe_form_bounded_at_surface(self, stratified_star):
        radius = stratified_star.radius_R
        r = np.array([radius * (1.0 - 1e-6), radius])
        values = radial_q00(stratified_star, r)
        assert np.all(np.isfinite(values))
        assert np.max(np.abs(values)) < 1e3 * np.max(np.abs(radial_q00(stratified_star)[1:-1]))

    def test_safe_form_finite_on_grid(self, isentropic_star):
        assert np.all(np.isfinite(radial_q00(isentropic_star)))

    def test_unknown_form(self, isentropic_star):
        with pytest.raises(ValueError):
            radial_q00(isentropic_star, form="exact")


class TestLiouvilleEndpoints:
    """Inverse-square strengths of the transformed potential."""

    def test_predicted_strengths(self, isentropic_star):
        k_left, k_right = radial_endpoint_strengths(isentropic_star)
        assert k_left == 2.0
        # (gamma + 1)(3 - gamma) / (4 (gamma - 1)^2) at gamma = 3/2.
        assert k_right == pytest.approx(3.75)

    def test_measured_strengths(self, isentropic_star):
        transform = radial_liouville(isentropic_star)
        center, surface = measured_endpoint_strengths(transform)
        assert center == pytest.approx(2.0, rel=2e-2)
        assert surface == pytest.approx(3.75, rel=2e-2)

    def test_travel_time_finite(self, isentropic_star):
        transform = radial_liouville(isentropic_star)
        assert np.isfinite(transform.x_plus)
        assert np.all(np.diff(transform.x) > 0.0)


class TestRadialSpectrum:
    """Eigenvalues, eigenfunctions and oracles."""

    def test_strictly_increasing(self, spectrum):
        assert np.all(np.diff(spectrum.eigenvalues) > 0.0)
        assert spectrum.eigenvalues[0] > 0.0

    def test_node_counts(self, spectrum):
        assert [m.node_count for m in spectrum.modes] == [0, 1, 2]
        assert [m.n for m in spectrum.modes] == [1, 2, 3]

    def test_matches_dense_oracle(self, isentropic_star, spectrum):
        oracle = radial_dense_oracle(isentropic_star, 1)
        assert spectrum.eigenvalues[0] == pytest.approx(oracle[0], rel=1e-4)

    def test_rayleigh_bound(self, isentropic_star, spectrum):
        assert spectrum.eigenvalues[0] >= rayleigh_lower_bound(isentropic_star)

    def test_displacement_mapping(self, isentropic_star, spectrum):
        mode = spectrum.modes[0]
        np.testing.assert_allclose(mode.V, isentropic_star.grid_r * mode.psi)
        assert mode.V[0] == 0.0

    def test_rows(self, spectrum):
        rows = spectrum.rows()
        assert [row["n"] for row in rows] == [1, 2, 3]
        assert set(rows[0]) == {"n", "lambda", "node_count"}

    def test_density_scaling(self, stratified_star, rescaled_star):
        """rho -> tau rho(tau r) multiplies every eigenvalue by tau."""
        base = radial_spectrum(stratified_star, 2).eigenvalues
        scaled = radial_spectrum(rescaled_star, 2).eigenvalues
        np.testing.assert_allclose(scaled / 0.1, base, rtol=1e-4)
