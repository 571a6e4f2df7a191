"""Tests for background profiles, scale heights and reduction factors."""
import numpy as np
import pytest

from stellar_modes.errors import DomainError, LambdaTooLarge, MuTooLarge
from stellar_modes.profiles import (
    background_profiles,
    gough_factors,
    lamb_frequency_sq,
    lambda0_default,
    mean_density,
    mu0_default,
    pmode_factors,
    scale_height_inv,
)


@pytest.fixture(scope="module")
def profiles(stratified_star):
    return background_profiles(stratified_star)


class TestMeanDensity:
    """<rho> = 3 m(r) / (4 pi r^3)."""

    def test_center_value(self, isentropic_star):
        mean = mean_density(isentropic_star)
        assert mean[0] == pytest.approx(isentropic_star.rho_O, rel=1e-5)

    def test_bounds(self, stratified_star):
        mean = mean_density(stratified_star)
        assert np.all(mean <= stratified_star.rho_O * (1.0 + 1e-5))
        assert np.all(mean[1:] >= stratified_star.rho[1:] * (1.0 - 1e-8))

    def test_lamb_frequency(self, isentropic_star):
        s2 = lamb_frequency_sq(isentropic_star, 2)
        assert np.isinf(s2[0])
        assert np.all(s2[1:-1] > 0.0)


class TestBackgroundProfiles:
    """Schwarzschild discriminant and buoyancy frequency."""

    def test_isentropic_is_neutral(self, isentropic_star):
        p = background_profiles(isentropic_star)
        np.testing.assert_allclose(p.N2, 0.0, atol=1e-14)
        np.testing.assert_allclose(p.A, 0.0, atol=1e-14)

    def test_stratified_is_stable(self, profiles):
        assert np.all(profiles.N2[1:-1] > 0.0)
        assert np.all(profiles.A[1:-1] < 0.0)

    def test_gravity_over_radius(self, profiles, stratified_star):
        assert profiles.g_over_r[0] == pytest.approx(stratified_star.g_O)
        np.testing.assert_allclose(
            profiles.g_over_r[1:], profiles.g[1:] / profiles.r[1:], rtol=1e-12,
        )


class TestScaleHeight:
    """1/H[Q] = -(log Q)' from analytic log-derivatives."""

    def test_density(self, profiles):
        inv_h = scale_height_inv(profiles, "rho")
        body = slice(1, -1)
        np.testing.assert_allclose(
            inv_h[body], -profiles.drho[body] / profiles.rho[body], rtol=1e-8,
        )
        assert inv_h[0] == inv_h[1]
        assert inv_h[-1] == np.inf

    def test_pressure_is_rho_g_over_p(self, profiles):
        inv_h = scale_height_inv(profiles, "P")
        body = slice(1, -1)
        expected = profiles.rho[body] * profiles.g[body] / profiles.P[body]
        np.testing.assert_allclose(inv_h[body], expected, rtol=1e-8)

    def test_radius_center_limit(self, profiles):
        inv_h = scale_height_inv(profiles, "r")
        assert inv_h[0] == -np.inf
        np.testing.assert_allclose(inv_h[1:-1], -1.0 / profiles.r[1:-1], rtol=1e-12)

    def test_products_add(self, profiles):
        combined = scale_height_inv(profiles, "rho*g^2/r^4")
        parts = (
            scale_height_inv(profiles, "rho")
            + 2.0 * scale_height_inv(profiles, "g")
            - 4.0 * scale_height_inv(profiles, "r")
        )
        np.testing.assert_allclose(combined[1:-1], parts[1:-1], rtol=1e-10)

    def test_interpolates_to_radii(self, profiles):
        r = profiles.r[10:20]
        np.testing.assert_allclose(
            scale_height_inv(profiles, "c2", r=r), scale_height_inv(profiles, "c2")[10:20],
        )

    def test_unknown_field(self, profiles):
        with pytest.raises(DomainError):
            scale_height_inv(profiles, "rho*foo")

    def test_gough_field_needs_aux(self, profiles):
        with pytest.raises(DomainError):
            scale_height_inv(profiles, "E")

    def test_gough_field_with_aux(self, profiles, stratified_star):
        aux = gough_factors(stratified_star, 2, 0.5 * lambda0_default(stratified_star, 2))
        inv_h = profiles.inv_scale_height("E", aux)
        assert np.all(np.isfinite(inv_h))


class TestGoughFactors:
    """E(r; lambda) and its admissible range."""

    def test_zero_lambda_is_identity(self, stratified_star):
        aux = gough_factors(stratified_star, 2, 0.0)
        np.testing.assert_allclose(aux.E, 1.0)
        assert aux.L0 == 6

    def test_lambda0_matches_floor(self, stratified_star):
        lam0 = lambda0_default(stratified_star, 2)
        aux = gough_factors(stratified_star, 2, lam0)
        assert aux.min_E == pytest.approx(0.9, abs=1e-8)

    def test_lambda_too_large(self, stratified_star):
        lam0 = lambda0_default(stratified_star, 2)
        with pytest.raises(LambdaTooLarge) as info:
            gough_factors(stratified_star, 2, 100.0 * lam0)
        assert info.value.diagnostics["l"] == 2

    @pytest.mark.parametrize("l, lam", [(0, 0.1), (2, -1.0)])
    def test_invalid_arguments(self, stratified_star, l, lam):
        with pytest.raises(DomainError):
            gough_factors(stratified_star, l, lam)

    def test_weight_positive(self, stratified_star):
        aux = gough_factors(stratified_star, 1, 0.3 * lambda0_default(stratified_star, 1))
        assert np.all(aux.W[1:-1] > 0.0)


class TestPModeFactors:
    """Ep(r; mu) at mu = 1/lambda."""

    def test_zero_mu_is_identity(self, stratified_star):
        aux = pmode_factors(stratified_star, 2, 0.0)
        np.testing.assert_allclose(aux.Ep, 1.0)

    def test_mu0_matches_floor(self, stratified_star):
        mu0 = mu0_default(stratified_star, 2)
        assert pmode_factors(stratified_star, 2, mu0).min_Ep == pytest.approx(0.9, abs=1e-8)

    def test_mu_too_large(self, stratified_star):
        mu0 = mu0_default(stratified_star, 2)
        with pytest.raises(MuTooLarge):
            pmode_factors(stratified_star, 2, 100.0 * mu0)

    def test_kappa_is_inverse_sound_speed(self, stratified_star):
        aux = pmode_factors(stratified_star, 3, 0.0)
        p = background_profiles(stratified_star)
        np.testing.assert_allclose(aux.kappap[:-1] * p.c2[:-1], 1.0)
