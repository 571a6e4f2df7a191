"""Shared star fixtures for stellar-modes tests.

Building an equilibrium takes a fraction of a second, but the spectral
tests reuse the same few stars many times, so they are session scoped.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from stellar_modes.config import Tolerances
from stellar_modes.equilibrium import (
    EntropyLaw,
    EosSpec,
    GridSpec,
    build_equilibrium,
    rescale_tau,
)

# Entropy law Sigma(omega) = -0.01 omega: S increases outward, N^2 > 0.
STRATIFIED_SIGMA = (0.0, -0.01)


def smooth_function(r: np.ndarray, radius: float, seed: int, terms: int = 5) -> np.ndarray:
    """Random smooth test function on [0, R] (cosine series, fixed seed)."""
    rng = np.random.default_rng(seed)
    x = r / radius
    return sum(c * np.cos(k * np.pi * x) for k, c in enumerate(rng.normal(size=terms)))


@pytest.fixture(scope="session")
def tolerances() -> Tolerances:
    return Tolerances()


@pytest.fixture(scope="session")
def isentropic_eos() -> EosSpec:
    """gamma = 3/2, i.e. nu = 2, constant entropy."""
    return EosSpec(gamma=1.5, c_v=1.0, sigma=EntropyLaw.constant(0.0), grav_const=1.0)


@pytest.fixture(scope="session")
def isentropic_star(isentropic_eos):
    return build_equilibrium(isentropic_eos, 1.0, GridSpec(nodes=401))


@pytest.fixture(scope="session")
def stratified_eos() -> EosSpec:
    return EosSpec(
        gamma=1.5, c_v=1.0, sigma=EntropyLaw.polynomial(STRATIFIED_SIGMA), grav_const=1.0,
    )


@pytest.fixture(scope="session")
def stratified_star(stratified_eos):
    return build_equilibrium(stratified_eos, 1.0, GridSpec(nodes=401))


@pytest.fixture(scope="session")
def rescaled_star(stratified_star):
    """Stratified star with rho(r) = tau rho_1(tau r), tau = 0.1."""
    return rescale_tau(stratified_star, 0.1)


@pytest.fixture()
def config_file(tmp_path: Path):
    """Write a run config and return its path; keys override the reference config."""

    def _write(**overrides) -> Path:
        data = {
            "gamma": 1.5,
            "c_v": 1.0,
            "grav_const": 1.0,
            "sigma": {"kind": "polynomial", "coefficients": [0.0]},
            "rho_center": 1.0,
            "grid_nodes": 201,
            "modes": [{"l": 0, "branch": "radial", "n_range": [1, 3]}],
            "output_dir": str(tmp_path / "out"),
            "jobs": 2,
        }
        data.update(overrides)
        path = tmp_path / "run.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write
