"""Mixed-integer linear modelling on Pyomo, LP files and solver adapters."""

from .embedding import RegionEmbedding, add_abs_linearization, embed_secure_regions
from .lp_format import write_lp
from .model import (
    Expression,
    MilpModel,
    ObjectiveSense,
    Sense,
    Var,
    VarKind,
    linear_terms,
)
from .solver import (
    Solution,
    SolverConfig,
    SolveStatus,
    run_blocking,
    solve,
    solve_async,
    solve_many,
)

__all__ = [
    "Expression",
    "MilpModel",
    "ObjectiveSense",
    "RegionEmbedding",
    "Sense",
    "Solution",
    "SolverConfig",
    "SolveStatus",
    "Var",
    "VarKind",
    "add_abs_linearization",
    "embed_secure_regions",
    "linear_terms",
    "run_blocking",
    "solve",
    "solve_async",
    "solve_many",
    "write_lp",
]
