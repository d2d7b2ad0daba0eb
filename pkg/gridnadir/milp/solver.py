"""Solver adapters: CBC and GLPK executables through Pyomo, or in-process scipy HiGHS."""

import asyncio
from enum import Enum
import logging
from pathlib import Path
import shutil
import threading
import time
from typing import Any, Coroutine, Dict, Iterable, List, Optional, Union

import numpy as np
from pydantic import BaseSettings, Field, root_validator
from pyomo.common.errors import ApplicationError
from pyomo.opt import SolverFactory, TerminationCondition
from scipy.optimize import Bounds, LinearConstraint, milp
from typing_extensions import Annotated, Literal

from ..base import Record
from ..base.error import (
    SolutionParseError,
    SolverExitError,
    SolverNotFoundError,
    UsageError,
)
from .model import Expression, MatrixForm, MilpModel, ObjectiveSense, linear_terms

LOGGER = logging.getLogger(__name__)

IN_PROCESS = "scipy"
Dialect = Literal["cbc", "glpk"]

# Pyomo's temporary file manager is process-global
_PYOMO_LOCK = threading.Lock()


class SolveStatus(str, Enum):
    """Normalized solver outcomes."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit"


_TERMINATION = {
    TerminationCondition.optimal: SolveStatus.OPTIMAL,
    TerminationCondition.globallyOptimal: SolveStatus.OPTIMAL,
    TerminationCondition.infeasible: SolveStatus.INFEASIBLE,
    TerminationCondition.infeasibleOrUnbounded: SolveStatus.INFEASIBLE,
    TerminationCondition.unbounded: SolveStatus.UNBOUNDED,
    TerminationCondition.maxTimeLimit: SolveStatus.LIMIT,
    TerminationCondition.maxIterations: SolveStatus.LIMIT,
    TerminationCondition.maxEvaluations: SolveStatus.LIMIT,
    TerminationCondition.intermediateNonInteger: SolveStatus.LIMIT,
    TerminationCondition.userInterrupt: SolveStatus.LIMIT,
}


class SolverConfig(BaseSettings):
    """Solver selection and limits; GRIDNADIR_SOLVER picks the solver."""

    solver: Annotated[
        str, Field(description="Path to a cbc or glpsol executable, or 'scipy'")
    ] = IN_PROCESS
    dialect: Optional[Dialect] = None
    time_limit: Annotated[Optional[float], Field(description="Seconds")] = None
    gap: Annotated[float, Field(description="Relative MIP gap", ge=0)] = 1e-6
    threads: Annotated[int, Field(ge=1)] = 1
    seed: Annotated[int, Field(ge=0)] = 0
    keepfiles: Annotated[
        bool, Field(description="Keep the LP, log and solution files Pyomo writes")
    ] = False

    class Config:
        """SolverConfig Config."""

        env_prefix = "GRIDNADIR_"

    @property
    def in_process(self) -> bool:
        """Whether the scipy backend is selected."""
        return self.solver == IN_PROCESS

    def resolved_dialect(self) -> Dialect:
        """Dialect given explicitly or guessed from the executable name."""
        if self.dialect:
            return self.dialect
        stem = Path(self.solver).name.lower()
        if "cbc" in stem:
            return "cbc"
        if "glp" in stem:
            return "glpk"
        raise UsageError(
            "Cannot tell the dialect of {}; pass --solver-dialect".format(self.solver)
        )

    def options(self) -> Dict[str, Union[float, int]]:
        """Command-line options of the external solver."""
        if self.resolved_dialect() == "cbc":
            options = {
                "ratioGap": self.gap,
                "threads": self.threads,
                "randomCbcSeed": self.seed + 1,
            }
            if self.time_limit is not None:
                options["sec"] = self.time_limit
            return options
        options = {"mipgap": self.gap, "seed": self.seed}
        if self.time_limit is not None:
            options["tmlim"] = max(1, int(np.ceil(self.time_limit)))
        return options


class Solution(Record):
    """Solver result keyed by variable name.

    Optimal and limit solutions carry values; infeasible and unbounded ones
    do not. Values the solver did not find, as when a time limit expires
    before the first incumbent, are the model's starting point and have
    ``incumbent`` unset.
    """

    status: SolveStatus
    objective: Optional[float] = None
    values: Optional[Dict[str, float]] = None
    incumbent: Annotated[
        bool, Field(description="Whether the values were found by the solver")
    ] = True
    solver: str = IN_PROCESS
    log: Optional[str] = Field(None, description="Solver message or log text")
    seconds: float = 0.0

    @root_validator(skip_on_failure=True)
    @classmethod
    def _values_match_status(cls, values):
        status, found = values["status"], values.get("values")
        if status in (SolveStatus.OPTIMAL, SolveStatus.LIMIT) and found is None:
            raise ValueError("{} solutions carry variable values".format(status.value))
        if status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED) and found:
            raise ValueError("{} solutions carry no values".format(status.value))
        if status is SolveStatus.OPTIMAL and not values["incumbent"]:
            raise ValueError("optimal values come from the solver")
        if (found is None) != (values.get("objective") is None):
            raise ValueError("an objective value comes with variable values")
        if found is None:
            values["incumbent"] = False
        return values

    @property
    def has_values(self) -> bool:
        """Whether variable values are available."""
        return self.values is not None

    def _require_values(self) -> Dict[str, float]:
        if self.values is None:
            raise SolutionParseError(
                "Solution with status {} has no values".format(self.status.value)
            )
        return self.values

    def value(self, item: Union[Expression, str]) -> float:
        """Value of a variable, name or expression."""
        if isinstance(item, str):
            return self._require_values()[item]
        return self.evaluate(item)

    def evaluate(self, expr: Expression) -> float:
        """Value of an affine expression of the solved model."""
        values = self._require_values()
        terms, constant = linear_terms(expr)
        return constant + sum(coef * values[var.local_name] for var, coef in terms)


def _objective(model: MilpModel, values: Dict[str, float]) -> float:
    terms, constant = linear_terms(model.objective)
    return constant + sum(coef * values[var.local_name] for var, coef in terms)


def _without_incumbent(
    model: MilpModel, solver: str, log: Optional[str] = None, seconds: float = 0.0
) -> Solution:
    values = model.values()
    return Solution(
        status=SolveStatus.LIMIT,
        objective=_objective(model, values),
        values=values,
        incumbent=False,
        solver=solver,
        log=log,
        seconds=seconds,
    )


def _solve_matrix(model: MilpModel, form: MatrixForm, config: SolverConfig) -> Solution:
    cost = form.cost
    if model.objective_sense is ObjectiveSense.MAXIMIZE:
        cost = -cost
    options = {"disp": False, "mip_rel_gap": config.gap}
    if config.time_limit is not None:
        options["time_limit"] = config.time_limit
    constraints = (
        [LinearConstraint(form.matrix, form.row_lower, form.row_upper)]
        if model.num_constraints
        else None
    )
    started = time.perf_counter()
    result = milp(
        cost,
        integrality=form.integrality,
        bounds=Bounds(form.lower, form.upper),
        constraints=constraints,
        options=options,
    )
    seconds = time.perf_counter() - started
    status = {
        0: SolveStatus.OPTIMAL,
        1: SolveStatus.LIMIT,
        2: SolveStatus.INFEASIBLE,
        3: SolveStatus.UNBOUNDED,
    }.get(result.status)
    if status is None:
        raise SolverExitError(
            "scipy milp failed: {}".format(result.message),
            returncode=result.status,
            log=result.message,
        )
    values = None
    if status in (SolveStatus.OPTIMAL, SolveStatus.LIMIT) and result.x is not None:
        x = np.asarray(result.x, dtype=float)
        integral = form.integrality == 1
        x[integral] = np.round(x[integral])
        values = {
            var.local_name: float(x[index]) for index, var in enumerate(model.variables)
        }
    elif status is SolveStatus.LIMIT:
        return _without_incumbent(model, IN_PROCESS, result.message, seconds)
    return Solution(
        status=status,
        objective=_objective(model, values) if values is not None else None,
        values=values,
        solver=IN_PROCESS,
        log=result.message,
        seconds=seconds,
    )


def _resolve_executable(solver: str) -> str:
    found = shutil.which(solver)
    if found is None:
        raise SolverNotFoundError(
            "Solver executable not found: {}".format(solver), path=solver
        )
    return found


def _solve_pyomo(model: MilpModel, config: SolverConfig, executable: str) -> Solution:
    dialect = config.resolved_dialect()
    opt = SolverFactory(dialect, executable=executable)
    if not opt.available(exception_flag=False):
        raise SolverNotFoundError(
            "{} at {} is not usable".format(dialect, executable), path=executable
        )
    for var in model.variables:
        if not var.fixed:
            var.set_value(None, skip_validation=True)
    started = time.perf_counter()
    with _PYOMO_LOCK:
        try:
            results = opt.solve(
                model.block,
                options=config.options(),
                load_solutions=False,
                symbolic_solver_labels=True,
                keepfiles=config.keepfiles,
                tee=False,
            )
        except ApplicationError as err:
            raise SolverExitError(
                "{} did not exit normally".format(dialect), log=str(err)
            ) from err
        except (ValueError, KeyError, IndexError) as err:
            raise SolutionParseError(
                "Cannot read the {} solution: {}".format(dialect, err)
            ) from err
        seconds = time.perf_counter() - started
        condition = results.solver.termination_condition
        status = _TERMINATION.get(condition)
        message = str(results.solver.message or condition)
        if status is None:
            raise SolverExitError(
                "{} stopped with termination condition {}".format(dialect, condition),
                log=message,
            )
        values = None
        if status in (SolveStatus.OPTIMAL, SolveStatus.LIMIT) and len(results.solution):
            model.block.solutions.load_from(results)
            values = model.values()
        elif status is SolveStatus.LIMIT:
            return _without_incumbent(model, dialect, message, seconds)
    if status is SolveStatus.OPTIMAL and values is None:
        raise SolutionParseError(
            "{} reported an optimum without a solution".format(dialect)
        )
    return Solution(
        status=status,
        objective=_objective(model, values) if values is not None else None,
        values=values,
        solver=dialect,
        log=message,
        seconds=seconds,
    )


async def solve_async(
    model: MilpModel, config: Optional[SolverConfig] = None
) -> Solution:
    """Solve a model with the configured backend.

    A non-positive time limit returns the starting point as a limit status
    without an incumbent and without starting a solver.
    """
    config = config or SolverConfig()
    if config.time_limit is not None and config.time_limit <= 0:
        return _without_incumbent(model, config.solver, "no time left to solve")
    if not model.num_vars:
        _, constant = linear_terms(model.objective)
        return Solution(status=SolveStatus.OPTIMAL, objective=constant, values={})
    LOGGER.info(
        "Solving %s (%d vars, %d rows) with %s",
        model.name,
        model.num_vars,
        model.num_constraints,
        config.solver,
    )
    if config.in_process:
        form = model.matrix_form()
        solution = await asyncio.to_thread(_solve_matrix, model, form, config)
    else:
        executable = _resolve_executable(config.solver)
        config.resolved_dialect()
        solution = await asyncio.to_thread(_solve_pyomo, model, config, executable)
    LOGGER.info(
        "%s: %s objective=%s in %.2f s",
        model.name,
        solution.status.value,
        solution.objective,
        solution.seconds,
    )
    return solution


def run_blocking(coroutine: Coroutine[Any, Any, Any], alternative: str):
    """Run a coroutine to completion outside of any event loop.

    Inside a running loop the coroutine is closed unstarted and the error
    names the coroutine function to await instead.
    """
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(coroutine)
    coroutine.close()
    raise RuntimeError(
        "Blocking call inside a running event loop; await {} instead".format(alternative)
    )


def solve(model: MilpModel, config: Optional[SolverConfig] = None) -> Solution:
    """Blocking wrapper around solve_async."""
    return run_blocking(solve_async(model, config), "solve_async")


async def solve_many(
    models: Iterable[MilpModel], config: Optional[SolverConfig] = None, jobs: int = 1
) -> List[Solution]:
    """Solve independent models with at most jobs in flight, keeping order."""
    semaphore = asyncio.Semaphore(max(jobs, 1))

    async def bounded(model: MilpModel) -> Solution:
        async with semaphore:
            return await solve_async(model, config)

    return list(await asyncio.gather(*(bounded(model) for model in models)))
