"""End-to-end spectrum computations.

These run the fixed-point searches and the determinant scans over whole
branches, which takes minutes rather than seconds.

Run with: uv run pytest tests/integration/test_spectra.py -v -m integration
"""

import numpy as np
import pytest
from conftest import smooth_function

from stellar_modes.config import Tolerances
from stellar_modes.nonradial import fixed_point_eigenvalues
from stellar_modes.ode4 import (
    decay_exponent,
    ode4_modes,
    resolvent_residual,
    solve_inhomogeneous,
    weak_resolvent_residual,
)
from stellar_modes.profiles import lambda0_default, mu0_default

pytestmark = pytest.mark.integration

# A stable star under Cowling has L >= 0, so negative parameters are resolvent points.
OFF_SPECTRUM = (-0.25, -0.5, -1.0, -2.0, -4.0)


@pytest.fixture(scope="module")
def p_cowling(isentropic_star):
    return fixed_point_eigenvalues(isentropic_star, 2, "p", (1, 2), cowling=True)


@pytest.fixture(scope="module")
def g_cowling(stratified_star):
    return fixed_point_eigenvalues(stratified_star, 1, "g", (1, 2), cowling=True)


class TestPModes:
    """Cowling p modes of the constant-entropy star."""

    def test_ordering(self, p_cowling, isentropic_star):
        lams = [mode.lam for mode in p_cowling]
        assert [mode.n for mode in p_cowling] == [1, 2]
        assert lams[0] < lams[1]
        assert lams[0] > 1.0 / mu0_default(isentropic_star, 2)

    def test_fixed_point_consistency(self, p_cowling):
        for mode in p_cowling:
            assert mode.consistency < 1e-6
            assert mode.fields is not None
            assert np.isfinite(mode.x_plus)

    def test_formulations_agree(self, p_cowling, isentropic_star):
        references = [mode.lam for mode in p_cowling]
        ode4 = ode4_modes(isentropic_star, 2, "p", (1, 2), cowling=True, references=references)
        assert len(ode4) == 2
        for reduced, full in zip(p_cowling, ode4):
            assert full.lam == pytest.approx(reduced.lam, rel=Tolerances().cross_formulation)
            assert "cross_formulation_mismatch" not in full.flags


class TestGModes:
    """Cowling g modes of the stratified star."""

    def test_ordering(self, g_cowling, stratified_star):
        lams = [mode.lam for mode in g_cowling]
        assert 0.0 < lams[1] < lams[0] < lambda0_default(stratified_star, 1)

    def test_formulations_agree(self, g_cowling, stratified_star):
        references = [mode.lam for mode in g_cowling]
        ode4 = ode4_modes(stratified_star, 1, "g", (1, 2), cowling=True, references=references)
        for reduced, full in zip(g_cowling, ode4):
            assert full.lam == pytest.approx(reduced.lam, rel=Tolerances().cross_formulation)


class TestCowlingShift:
    """Neglecting the potential perturbation matters less at higher degree."""

    @staticmethod
    def _shift(star, l):
        full = ode4_modes(star, l, "p", (1, 1))[0].lam
        cowling = ode4_modes(star, l, "p", (1, 1), cowling=True)[0].lam
        return abs(full - cowling) / full

    def test_shift_decreases_with_degree(self, isentropic_star):
        low = self._shift(isentropic_star, 2)
        high = self._shift(isentropic_star, 4)
        assert 0.0 < high < low


class TestResolvent:
    """Inhomogeneous solve off the spectrum."""

    @pytest.mark.parametrize(("seed", "lam"), list(enumerate(OFF_SPECTRUM)))
    def test_negative_parameter(self, stratified_star, seed, lam):
        r = stratified_star.grid_r
        radius = stratified_star.radius_R
        forcing = (smooth_function(r, radius, seed), smooth_function(r, radius, seed + 100))
        assert abs(forcing[0][-1]) > 0.0 and abs(forcing[1][-1]) > 0.0

        solution = solve_inhomogeneous(stratified_star, 2, lam, forcing, cowling=True)

        assert np.all(np.isfinite(solution.y))
        assert weak_resolvent_residual(solution, stratified_star, 2, forcing) < 1e-6
        assert resolvent_residual(solution, stratified_star, 2, forcing) < 1e-2
        assert decay_exponent(solution, radius) > 0.0
