"""Run configuration for the stellar-modes CLI.

A run is described by a single JSON file. Every tolerance used by the
library is a key under ``tolerances`` with the defaults below.

Usage:
    config = RunConfig.from_file("run.json")
    eos = config.eos()
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any

from stellar_modes.errors import ConfigError

if TYPE_CHECKING:
    from stellar_modes.equilibrium import EosSpec

BRANCHES = ("radial", "g", "p")
FORMULATIONS = ("gough", "ode4", "both")


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances and thresholds, one field per documented knob."""

    # equilibrium
    integrator_rtol: float = 1e-12
    surface_fit: float = 1e-4
    center_fit: float = 1e-6
    vacuum_slope: float = 0.05
    hydrostatic: float = 1e-8
    poisson: float = 1e-6
    # profiles / nonradial
    eps_E: float = 0.1
    boundary_layer: float = 1e-3
    operator_residual: float = 1e-4
    # gravity
    delta_G: float = 0.5
    delta_B0: float = 1.0
    delta_B1: float = 0.5
    epsilon_B: float = 0.5
    neumann: float = 1e-8
    symmetry: float = 1e-10
    hl_ode: float = 1e-6
    # sl_solver
    x_eps: float = 1e-4
    sl_agreement: float = 1e-6
    eigen_gap: float = 1e-8
    # fixed points and ode4
    fixed_point: float = 1e-8
    series_residual: float = 1e-10
    series_overlap: float = 1e-8
    determinant_spread: float = 1e-6
    cross_formulation: float = 1e-3
    resolvent: float = 1e-6

    def scaled(self, factor: float) -> Tolerances:
        """Return tolerances multiplied by ``factor`` (thresholds stay put).

        Args:
            factor: Multiplier, e.g. 0.1 to tighten every check tenfold.

        Returns:
            New Tolerances instance.
        """
        if factor <= 0:
            raise ConfigError(f"Tolerance scale must be positive, got {factor}")
        fixed = {
            "delta_G", "delta_B0", "delta_B1", "epsilon_B",
            "eps_E", "boundary_layer", "x_eps", "vacuum_slope",
        }
        return replace(self, **{
            f.name: getattr(self, f.name) * factor
            for f in fields(self) if f.name not in fixed
        })

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Tolerances:
        known = {f.name for f in fields(cls)}
        _reject_unknown(data, known, "tolerances")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class ModeRequest:
    """One spectrum request: degree, branch and radial-order range."""

    l: int
    branch: str
    n_range: tuple[int, int] = (1, 3)
    formulation: str = "gough"
    cowling: bool = False

    def __post_init__(self) -> None:
        if self.l < 0:
            raise ConfigError(f"Degree l must be >= 0, got {self.l}")
        if self.branch not in BRANCHES:
            raise ConfigError(f"Unknown branch {self.branch!r}; expected one of {BRANCHES}")
        if (self.branch == "radial") != (self.l == 0):
            raise ConfigError("Branch 'radial' is used exactly for l = 0")
        lo, hi = self.n_range
        if lo < 1 or hi < lo:
            raise ConfigError(f"Invalid n_range {self.n_range}")
        if self.formulation not in FORMULATIONS:
            raise ConfigError(
                f"Unknown formulation {self.formulation!r}; expected one of {FORMULATIONS}"
            )

    @property
    def orders(self) -> range:
        return range(self.n_range[0], self.n_range[1] + 1)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModeRequest:
        _reject_unknown(data, {f.name for f in fields(cls)}, "modes[]")
        if "l" not in data or "branch" not in data:
            raise ConfigError("Mode requests need 'l' and 'branch'")
        n_range = data.get("n_range", (1, 3))
        return cls(
            l=int(data["l"]),
            branch=str(data["branch"]),
            n_range=(int(n_range[0]), int(n_range[1])),
            formulation=str(data.get("formulation", "gough")),
            cowling=bool(data.get("cowling", False)),
        )


@dataclass
class RunConfig:
    """Complete description of one run: star, requested modes and outputs."""

    gamma: float
    c_v: float = 1.0
    grav_const: float = 1.0
    sigma: dict[str, Any] = field(
        default_factory=lambda: {"kind": "polynomial", "coefficients": [0.0]}
    )
    rho_center: float = 1.0
    rho_center_bound: float | None = None
    tau: float = 1.0
    grid_nodes: int = 801
    modes: list[ModeRequest] = field(default_factory=list)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_dir: str = "data"
    jobs: int = 4
    seed: int = 0
    strict: bool = False
    cache_path: str | None = None
    database_url: str | None = None

    def __post_init__(self) -> None:
        if self.rho_center <= 0:
            raise ConfigError(f"rho_center must be positive, got {self.rho_center}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.grid_nodes < 65:
            raise ConfigError(f"grid_nodes must be >= 65, got {self.grid_nodes}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        kind = self.sigma.get("kind")
        if kind not in ("polynomial", "table"):
            raise ConfigError(f"sigma.kind must be 'polynomial' or 'table', got {kind!r}")
        allowed = {"kind", "coefficients"} if kind == "polynomial" else {"kind", "omega", "values"}
        _reject_unknown(self.sigma, allowed, "sigma")
        if self.database_url is None:
            self.database_url = os.environ.get("DATABASE_URL")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        """Build and validate a config from a plain dict.

        Args:
            data: Parsed JSON object.

        Returns:
            Validated RunConfig.

        Raises:
            ConfigError: On unknown keys or invalid values.
        """
        _reject_unknown(data, {f.name for f in fields(cls)}, "config")
        if "gamma" not in data:
            raise ConfigError("Config requires 'gamma'")
        values = dict(data)
        values["modes"] = [ModeRequest.from_dict(m) for m in data.get("modes", [])]
        values["tolerances"] = Tolerances.from_dict(data.get("tolerances", {}))
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(f"Invalid config: {e}") from e

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        """Load a config from a JSON file."""
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file is not valid JSON: {e}") from e
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["modes"] = [asdict(m) for m in self.modes]
        data.pop("database_url", None)
        return data

    def eos(self) -> EosSpec:
        """Equation of state described by this config."""
        from stellar_modes.equilibrium import EntropyLaw, EosSpec

        if self.sigma["kind"] == "polynomial":
            law = EntropyLaw.polynomial(self.sigma.get("coefficients", [0.0]))
        else:
            law = EntropyLaw.table(self.sigma["omega"], self.sigma["values"])
        return EosSpec(
            gamma=self.gamma, c_v=self.c_v, sigma=law, grav_const=self.grav_const,
        )

    def star_key(self) -> str:
        """Stable digest of everything that determines the equilibrium."""
        payload = {
            "gamma": self.gamma, "c_v": self.c_v, "grav_const": self.grav_const,
            "sigma": self.sigma, "rho_center": self.rho_center, "tau": self.tau,
            "grid_nodes": self.grid_nodes,
        }
        return _digest(payload)[:16]

    def request_key(self, request: ModeRequest) -> str:
        """Stable digest of one mode request against this star."""
        payload = {
            "star": self.star_key(), "request": asdict(request),
            "tolerances": asdict(self.tolerances),
        }
        return _digest(payload)


def _digest(payload: dict[str, Any]) -> str:
    canonical = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _reject_unknown(data: dict[str, Any], known: set[str], where: str) -> None:
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in {where}: {', '.join(unknown)}")
