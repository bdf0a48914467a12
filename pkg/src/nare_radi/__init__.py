"""Low-rank RADI-type solver for large nonsymmetric algebraic Riccati equations."""

from .exceptions import (
    AssumptionViolated,
    DegeneratePsi,
    IllConditionedShift,
    IterationBreakdown,
    NareError,
    NoSplitting,
    NoValidShift,
    ShiftError,
    SingularShift,
    SingularUpsilon,
    SizeGuardError,
)
from .generators import TransportParams, gen_nash, gen_random_stable, gen_transport
from .linear_solver import ShiftedSolver, factor_shifted
from .problem import NareProblem, classify, from_care, residual_dense, validate
from .radi import ConvergenceRecord, RADISolver, RadiState, SolveResult, solve
from .shifts import ShiftPair, ShiftStrategy, parse_strategy

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolated",
    "ConvergenceRecord",
    "DegeneratePsi",
    "IllConditionedShift",
    "IterationBreakdown",
    "NareError",
    "NareProblem",
    "NoSplitting",
    "NoValidShift",
    "RADISolver",
    "RadiState",
    "ShiftError",
    "ShiftPair",
    "ShiftStrategy",
    "ShiftedSolver",
    "SingularShift",
    "SingularUpsilon",
    "SizeGuardError",
    "SolveResult",
    "TransportParams",
    "classify",
    "factor_shifted",
    "from_care",
    "gen_nash",
    "gen_random_stable",
    "gen_transport",
    "parse_strategy",
    "residual_dense",
    "solve",
    "validate",
]
