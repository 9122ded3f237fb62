"""Experiment configuration: JSON files parsed into frozen dataclasses, unknown keys rejected."""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field, fields as dataclass_fields
from pathlib import Path
from typing import Any, Optional

from .domains import Domain, DomainGrid, domain_from_dict, truncated_grid
from .errors import ConfigError
from .fields import FieldSpec
from .potential import SolverOptions

SCENARIOS = ("equilibrium", "sample", "ldp", "ratio", "bm")


def _reject_unknown(data: dict[str, Any], allowed, where: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _from_block(cls, data: Optional[dict[str, Any]], where: str):
    data = data or {}
    _reject_unknown(data, [f.name for f in dataclass_fields(cls)], where)
    return cls(**data)


@dataclass(frozen=True)
class Tolerances:
    rel_gap: float = 0.15
    ratio_rel: float = 0.10
    bm_band: float = 1.1
    kkt_max: float = 1e-3
    tol_weight: float = 1e-3
    tol_eq: Optional[float] = None
    superlog_margin: float = 1.0
    tau_tail_a: Optional[float] = None
    rho_tol: float = 0.02


@dataclass(frozen=True)
class DomainBlock:
    """Either a bounded geometry or an unbounded set ("real_line" / "plane") cut at the truncation radius."""

    geometry: Optional[dict[str, Any]] = None
    unbounded: Optional[str] = None
    resolution: int = 64
    tau_scale: float = 1.0
    b: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.geometry is None) == (self.unbounded is None):
            raise ConfigError("domain needs exactly one of geometry or unbounded")
        if self.resolution < 2:
            raise ConfigError("domain resolution must be >= 2")
        if not self.tau_scale > 0:
            raise ConfigError("tau_scale must be positive")

    def build(self, field: FieldSpec) -> DomainGrid:
        if self.unbounded is not None:
            grid = truncated_grid(self.unbounded, field, self.resolution, self.b)
            return grid.with_tau_scale(self.tau_scale) if self.tau_scale != 1.0 else grid
        return DomainGrid.build(domain_from_dict(self.geometry), self.resolution, self.tau_scale)


@dataclass(frozen=True)
class BmBlock:
    degrees: tuple[int, ...] = (10, 20, 30, 40, 50)
    tail_n: tuple[int, ...] = (10, 20, 40)
    trials: int = 50
    cells: float = 3.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        object.__setattr__(self, "tail_n", tuple(int(d) for d in self.tail_n))


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    scenario: str
    field: FieldSpec
    domain: DomainBlock
    window: Optional[Domain] = None
    n_grid: tuple[int, ...] = (8, 16, 24, 32, 48, 64)
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    sweeps: int = 25_000
    burn_in: Optional[int] = None
    thin: int = 1
    output_dir: str = "out"
    tolerances: Tolerances = dataclass_field(default_factory=Tolerances)
    solver: SolverOptions = dataclass_field(default_factory=SolverOptions)
    bm: BmBlock = dataclass_field(default_factory=BmBlock)
    counterexample: bool = False
    symmetrize: bool = False
    log_samples: bool = True

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be strictly increasing")
        if self.n_grid and self.n_grid[0] < 1:
            raise ConfigError("n_grid values must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.burn_in is not None and not 0 <= self.burn_in < self.sweeps:
            raise ConfigError("sweeps must exceed burn_in")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.scenario == "ldp" and self.window is None:
            raise ConfigError("ldp scenario needs a window")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        allowed = [f.name for f in dataclass_fields(cls)]
        _reject_unknown(data, allowed, "config")
        for key in ("scenario", "field", "domain"):
            if key not in data:
                raise ConfigError(f"config lacks {key!r}")
        kwargs: dict[str, Any] = dict(data)
        kwargs["field"] = FieldSpec.from_dict(data["field"])
        kwargs["domain"] = _from_block(DomainBlock, data["domain"], "domain")
        if data.get("window") is not None:
            kwargs["window"] = domain_from_dict(data["window"])
        kwargs["tolerances"] = _from_block(Tolerances, data.get("tolerances"), "tolerances")
        kwargs["solver"] = _from_block(SolverOptions, data.get("solver"), "solver")
        kwargs["bm"] = _from_block(BmBlock, data.get("bm"), "bm")
        for key in ("n_grid", "seeds"):
            if key in data:
                kwargs[key] = tuple(int(v) for v in data[key])
        return cls(**kwargs)

    def build_grid(self) -> DomainGrid:
        return self.domain.build(self.field)


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a JSON config file."""
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(data)
