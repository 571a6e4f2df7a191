"""Tests for equilibrium construction and admissibility."""
import json
import math

import numpy as np
import pytest

from stellar_modes.equilibrium import (
    EntropyLaw,
    EosSpec,
    GridSpec,
    boundary_coefficients,
    build_equilibrium,
    check_admissible,
    lane_emden_radius,
    rescale_tau,
)
from stellar_modes.errors import DomainError, EosError, NoFiniteRadius


class TestLaneEmden:
    """Independent Lane-Emden integrator used as the oracle."""

    def test_index_one_is_pi(self):
        assert lane_emden_radius(1.0) == pytest.approx(math.pi, rel=1e-9)

    def test_index_two(self):
        assert lane_emden_radius(2.0) == pytest.approx(3.65375, rel=1e-5)

    def test_index_five_has_no_zero(self):
        with pytest.raises(NoFiniteRadius):
            lane_emden_radius(5.0)


class TestEosSpec:
    """Equation of state validation."""

    def test_nu(self):
        assert EosSpec(gamma=1.5).nu == pytest.approx(2.0)

    @pytest.mark.parametrize("gamma", [1.0, 2.0, 0.5])
    def test_gamma_out_of_range(self, gamma):
        with pytest.raises(EosError):
            EosSpec(gamma=gamma)

    def test_negative_heat_capacity(self):
        with pytest.raises(EosError):
            EosSpec(gamma=1.5, c_v=-1.0)

    def test_ellipticity_violation(self):
        """A steeply decreasing entropy law breaks ellipticity."""
        eos = EosSpec(gamma=1.5, sigma=EntropyLaw.polynomial([0.0, -100.0]))
        with pytest.raises(EosError):
            eos.check_ellipticity(1.0)

    def test_table_law_must_increase(self):
        with pytest.raises(DomainError):
            EntropyLaw.table([0.0, 0.0, 1.0], [0.0, 1.0, 2.0])


class TestBuildEquilibrium:
    """Shooting from the center to the vacuum boundary."""

    def test_matches_lane_emden(self, isentropic_star):
        xi = isentropic_star.radius_R / isentropic_star.length_scale
        assert xi == pytest.approx(lane_emden_radius(2.0), rel=1e-6)

    def test_rational_nu(self, isentropic_star):
        assert isentropic_star.rational_nu == (2, 1)

    def test_center_pressure_curvature(self, isentropic_star):
        """P_O1 = (4 pi / 3) G rho_O^2."""
        expected = 4.0 * math.pi / 3.0 * isentropic_star.rho_O**2
        assert isentropic_star.P_O1 == pytest.approx(expected, rel=1e-5)

    def test_surface_gravity(self, isentropic_star):
        """g_R = nu c_R^2 at a physical vacuum boundary."""
        star = isentropic_star
        assert star.g_R == pytest.approx(star.nu * star.c_R_sq, rel=1e-3)

    def test_profiles_monotone(self, stratified_star):
        assert np.all(np.diff(stratified_star.rho) < 0.0)
        assert np.all(np.diff(stratified_star.P) < 0.0)
        assert stratified_star.rho[-1] == pytest.approx(0.0, abs=1e-12)

    def test_no_finite_radius(self):
        """gamma = 1.2 is the n = 5 polytrope."""
        with pytest.raises(NoFiniteRadius):
            build_equilibrium(EosSpec(gamma=1.2), 1.0, GridSpec(nodes=201))

    def test_nonpositive_center_density(self, isentropic_eos):
        with pytest.raises(DomainError):
            build_equilibrium(isentropic_eos, 0.0)

    def test_center_density_bound(self):
        eos = EosSpec(gamma=1.3)
        with pytest.raises(DomainError):
            build_equilibrium(eos, 2.0, rho_center_bound=1.0)

    def test_fields_at_vectorized(self, isentropic_star):
        r = np.linspace(0.0, isentropic_star.radius_R, 7)
        f = isentropic_star.fields_at(r)
        assert f.rho.shape == (7,)
        assert f.rho[0] == pytest.approx(isentropic_star.rho_O, rel=1e-10)
        np.testing.assert_allclose(f.c2, isentropic_star.eos.gamma * f.omega * f.e, rtol=1e-10)


class TestAdmissibility:
    """check_admissible on built and corrupted stars."""

    def test_isentropic_passes(self, isentropic_star, tolerances):
        report = check_admissible(isentropic_star, tolerances)
        assert report.passed, report.failures()

    def test_stratified_passes(self, stratified_star, tolerances):
        report = check_admissible(stratified_star, tolerances)
        assert report.passed, report.failures()

    def test_report_lookup_and_dict(self, isentropic_star):
        report = check_admissible(isentropic_star)
        assert report["poisson"].passed
        data = report.to_dict()
        assert data["passed"] is True
        assert {c["name"] for c in data["checks"]} >= {"support", "hydrostatic", "physical_vacuum"}

    def test_corrupted_density_fails(self, isentropic_star):
        """A bump in rho breaks monotonicity."""
        from dataclasses import replace

        rho = isentropic_star.rho.copy()
        mid = len(rho) // 2
        rho[mid] = rho[mid - 1] * 1.5
        report = check_admissible(replace(isentropic_star, rho=rho))
        assert not report.passed
        assert "monotone_rho" in report.failures()

    def test_boundary_coefficients_consistent(self, isentropic_star):
        coeffs = boundary_coefficients(isentropic_star)
        assert coeffs["C_rho"] == pytest.approx(isentropic_star.C_rho, rel=1e-3)
        assert coeffs["P_O1"] == pytest.approx(isentropic_star.P_O1, rel=1e-5)


class TestRescaleTau:
    """rho(r) = tau rho_1(tau r) scalings."""

    def test_identity(self, stratified_star):
        assert rescale_tau(stratified_star, 1.0) is stratified_star

    def test_radius_and_mass(self, stratified_star, rescaled_star):
        tau = 0.1
        assert rescaled_star.radius_R * tau == pytest.approx(stratified_star.radius_R, rel=1e-6)
        assert rescaled_star.mass * tau**2 == pytest.approx(stratified_star.mass, rel=1e-5)
        assert rescaled_star.rho_O == pytest.approx(tau * stratified_star.rho_O)

    def test_nonpositive_tau(self, stratified_star):
        with pytest.raises(DomainError):
            rescale_tau(stratified_star, 0.0)


class TestMetadata:
    """Serializable star outputs."""

    def test_metadata_is_json(self, isentropic_star):
        data = json.loads(json.dumps(isentropic_star.metadata()))
        assert data["rational_nu"] == [2, 1]
        assert data["radius_R"] == pytest.approx(isentropic_star.radius_R)

    def test_profile_table(self, isentropic_star):
        rows = isentropic_star.profile_table()
        assert len(rows) == len(isentropic_star.grid_r)
        assert set(rows[0]) == {"r", "rho", "P", "S", "Phi", "g", "c2", "A", "N2"}
        assert rows[0]["r"] == 0.0
