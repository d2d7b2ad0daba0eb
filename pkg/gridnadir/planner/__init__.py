"""Emergency-aware HVDC and storage planning."""

from .formulation import (
    PlanningMode,
    PlanningOptions,
    PlanningProblem,
    annuity_factor,
    build_planning_model,
)
from .report import compare_modes, write_report
from .result import PlanResult, extract_plan, solve_plan, solve_plan_async
from .system import PlanningSystem, load_system
from .validation import ValidationReport, validate_plan

__all__ = [
    "PlanResult",
    "PlanningMode",
    "PlanningOptions",
    "PlanningProblem",
    "PlanningSystem",
    "ValidationReport",
    "annuity_factor",
    "build_planning_model",
    "compare_modes",
    "extract_plan",
    "load_system",
    "solve_plan",
    "solve_plan_async",
    "validate_plan",
    "write_report",
]
