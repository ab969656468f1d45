"""Parameter-robust HDG / hybrid-mixed solver for multiple-network poroelasticity."""

from ._core import (
    CaseResult,
    ConfigError,
    ErrorReport,
    InfSupKind,
    Mesh,
    SolverError,
    SweepMode,
    Variant,
    annulus,
    brain,
    inf_sup,
    resolve_config,
    solve,
    sweep,
    unit_square,
    windowed_mean,
)

__all__ = [
    "CaseResult",
    "ConfigError",
    "ErrorReport",
    "InfSupKind",
    "Mesh",
    "SolverError",
    "SweepMode",
    "Variant",
    "annulus",
    "brain",
    "inf_sup",
    "resolve_config",
    "solve",
    "sweep",
    "unit_square",
    "windowed_mean",
]
