"""Numerical solver for time-periodic channel flow coupled to an elastically
mounted rigid body, with an energy/regularity diagnostics ledger."""

__version__ = "0.1.0"

from .config import RunConfig, load_config, reference_config
from .errors import (
    BasisError,
    ConfigError,
    GeometryError,
    MeshError,
    NoConvergence,
    PeriflowError,
    ResolutionError,
    ResonantOrNonUnique,
    StageError,
)
from .solver import FixedPointConfig, SolveResult, galerkin_solve

__all__ = [
    "RunConfig",
    "load_config",
    "reference_config",
    "FixedPointConfig",
    "SolveResult",
    "galerkin_solve",
    "PeriflowError",
    "ConfigError",
    "GeometryError",
    "MeshError",
    "BasisError",
    "ResolutionError",
    "ResonantOrNonUnique",
    "NoConvergence",
    "StageError",
]
