"""Shared solver arguments of optimizing commands."""

from argparse import ArgumentParser
from typing import Optional

from pydantic import Field, ValidationError
from typing_extensions import Annotated, Literal

from ..base import Command
from ..base.error import UsageError
from ..milp import SolverConfig


class SolverCommand(Command):
    """Command that solves MILPs; unset options fall back to GRIDNADIR_* variables."""

    solver: Annotated[
        Optional[str], Field(description="cbc or glpsol executable path, or 'scipy'")
    ] = None
    solver_dialect: Optional[Literal["cbc", "glpk"]] = None
    time_limit: Optional[float] = None
    gap: Optional[float] = None

    @classmethod
    def configure_parser(cls, parser: ArgumentParser):
        """Add solver arguments."""
        group = parser.add_argument_group("solver")
        group.add_argument("--solver", help="Executable path or 'scipy' (GRIDNADIR_SOLVER)")
        group.add_argument("--solver-dialect", choices=["cbc", "glpk"])
        group.add_argument("--time-limit", type=float, help="Seconds")
        group.add_argument("--gap", type=float, help="Relative MIP gap")

    def solver_config(self) -> SolverConfig:
        """Settings from arguments, then the environment."""
        values = {"seed": self.seed, "threads": self.jobs}
        if self.solver:
            values["solver"] = self.solver
        if self.solver_dialect:
            values["dialect"] = self.solver_dialect
        if self.time_limit is not None:
            values["time_limit"] = self.time_limit
        if self.gap is not None:
            values["gap"] = self.gap
        try:
            return SolverConfig(**values)
        except ValidationError as err:
            raise UsageError("Invalid solver settings: {}".format(err)) from err
