"""Unit tests for the utils module."""

import numpy as np
import pytest

from stellar_modes.errors import DomainError
from stellar_modes.utils import (
    _chunks,
    clustered_radii,
    cumulative_radial,
    even_polyfit,
    log_grid,
    parse_product,
    radial_weights,
    rational_approximation,
)


def test_chunks_splits_evenly():
    """Test chunking a list into fixed-size pieces."""
    assert list(_chunks([1, 2, 3, 4, 5], 2)) == [[1, 2], [3, 4], [5]]


def test_clustered_radii_endpoints():
    """Test that the clustered grid starts at 0 and ends at R."""
    r = clustered_radii(2.0, 33)
    assert r[0] == 0.0
    assert r[-1] == 2.0
    assert np.all(np.diff(r) > 0.0)
    # Denser near the ends than in the middle.
    assert r[1] - r[0] < r[17] - r[16]


def test_clustered_radii_too_few_nodes():
    """Test that fewer than three nodes is rejected."""
    with pytest.raises(DomainError):
        clustered_radii(1.0, 2)


@pytest.mark.parametrize("n", [33, 64])
def test_radial_weights_integrate_polynomials(n):
    """Test Clenshaw-Curtis weights on odd and even node counts."""
    radius = 3.0
    r = clustered_radii(radius, n)
    w = radial_weights(radius, n)
    assert w.sum() == pytest.approx(radius, rel=1e-12)
    assert w @ r**5 == pytest.approx(radius**6 / 6.0, rel=1e-12)


def test_cumulative_radial_matches_antiderivative():
    """Test the cumulative integral of r^2."""
    radius = 2.0
    r = clustered_radii(radius, 201)
    cumulative = cumulative_radial(r**2, radius)
    assert cumulative[0] == 0.0
    np.testing.assert_allclose(cumulative, r**3 / 3.0, atol=1e-6)


def test_cumulative_radial_tolerates_endpoint_singularity():
    """Test that an infinite endpoint sample does not poison the integral."""
    radius = 1.0
    r = clustered_radii(radius, 201)
    with np.errstate(divide="ignore"):
        values = 1.0 / np.sqrt(radius - r)
    cumulative = cumulative_radial(values, radius)
    assert np.isfinite(cumulative[-1])
    assert cumulative[-1] == pytest.approx(2.0, rel=1e-2)


@pytest.mark.parametrize(
    "value, expected",
    [(2.0, (2, 1, True)), (1.5, (3, 2, True)), (2.0 / 3.0, (2, 3, True))],
)
def test_rational_approximation_exact(value, expected):
    """Test recovery of simple rationals."""
    assert rational_approximation(value) == expected


def test_rational_approximation_irrational():
    """Test that sqrt(2) is not declared rational."""
    *_, exact = rational_approximation(np.sqrt(2.0))
    assert exact is False


def test_log_grid_endpoints():
    """Test the logarithmic grid includes both ends."""
    grid = log_grid(0.1, 10.0, 3)
    np.testing.assert_allclose(grid, [0.1, 1.0, 10.0])


def test_log_grid_invalid_window():
    """Test that a non-positive lower end is rejected."""
    with pytest.raises(DomainError):
        log_grid(0.0, 1.0, 5)


def test_even_polyfit_recovers_coefficients():
    """Test fitting 1 - 2 r^2 + 0.5 r^4."""
    r = np.linspace(0.0, 0.5, 40)
    coeffs, residual = even_polyfit(r, 1.0 - 2.0 * r**2 + 0.5 * r**4, 2)
    np.testing.assert_allclose(coeffs, [1.0, -2.0, 0.5], atol=1e-10)
    assert residual < 1e-12


def test_parse_product():
    """Test parsing a product with powers and division."""
    assert parse_product("rho*g^2/r^4") == [("rho", 1.0), ("g", 2.0), ("r", -4.0)]


def test_parse_product_decimal_power():
    """Test a fractional power with spaces around the separator."""
    assert parse_product("rho^0.5 / W") == [("rho", 0.5), ("W", -1.0)]


@pytest.mark.parametrize("expression", ["", "rho**g", "2rho", "rho g"])
def test_parse_product_malformed(expression):
    """Test that malformed expressions raise DomainError."""
    with pytest.raises(DomainError):
        parse_product(expression)
