"""Weighted potential theory and large-deviation workbench for beta-ensembles."""

from .config import ExperimentConfig, load_config
from .domains import Annulus, Circle, Disc, DomainGrid, IntervalUnion, Rectangle, truncated_grid
from .errors import (
    ConfigError,
    EnsembleLdpError,
    HypothesisViolation,
    InsufficientDataError,
    QuadratureCostError,
    SingularGramError,
)
from .fields import FieldSpec
from .potential import DiscreteMeasure, EquilibriumSolution, SolverOptions, solve_equilibrium
from .store import RunStore

__all__ = [
    "Annulus",
    "Circle",
    "ConfigError",
    "Disc",
    "DiscreteMeasure",
    "DomainGrid",
    "EnsembleLdpError",
    "EquilibriumSolution",
    "ExperimentConfig",
    "FieldSpec",
    "HypothesisViolation",
    "InsufficientDataError",
    "IntervalUnion",
    "QuadratureCostError",
    "Rectangle",
    "RunStore",
    "SingularGramError",
    "SolverOptions",
    "load_config",
    "solve_equilibrium",
    "truncated_grid",
]
