"""MILP construction, file export, and solver adapters."""

from .model import (
    AssetPanel,
    MilpModel,
    ModelBuildError,
    Row,
    Variable,
    big_m,
    build_m1,
    build_m2,
)
from .io import export_lp, export_mps, parse_lp, parse_mps
from .solvers import (
    CommandLineAdapter,
    ScipyMilpAdapter,
    SolveLimits,
    SolveOutcome,
    SolverError,
    certification_spec,
    certify,
    solve,
)

__all__ = [
    "AssetPanel",
    "MilpModel",
    "ModelBuildError",
    "Row",
    "Variable",
    "big_m",
    "build_m1",
    "build_m2",
    "export_lp",
    "export_mps",
    "parse_lp",
    "parse_mps",
    "CommandLineAdapter",
    "ScipyMilpAdapter",
    "SolveLimits",
    "SolveOutcome",
    "SolverError",
    "certification_spec",
    "certify",
    "solve",
]
