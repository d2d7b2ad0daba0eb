"""plan and report."""

from argparse import ArgumentParser
import logging
from pathlib import Path
from typing import ClassVar, List, Optional

from pydantic import Field
from typing_extensions import Annotated

from ..base import Command, RunContext
from ..base.error import UsageError
from ..data import SYSTEM_DIR
from ..efc import EfcCosts
from ..planner import (
    PlanningMode,
    PlanningOptions,
    PlanResult,
    build_planning_model,
    compare_modes,
    load_system,
    solve_plan_async,
    validate_plan,
    write_report,
)
from ..planner.report import FLOAT_FORMAT
from ..wodt import read_rule_sets
from .command_types import PLAN, REPORT
from .solver import SolverCommand

LOGGER = logging.getLogger(__name__)


class Plan(SolverCommand):
    """Build, solve and write a plan."""

    command_name: ClassVar[str] = PLAN

    system: Path = SYSTEM_DIR
    mode: PlanningMode = PlanningMode.FCEC
    rules: Optional[Path] = None
    discount_rate: Annotated[float, Field(ge=0)] = 0.05
    lifespan: Annotated[int, Field(ge=1)] = 30
    fault_probability: Optional[float] = None
    epc_cost: Annotated[float, Field(ge=0)] = 100.0
    dlc_cost: Annotated[float, Field(ge=0)] = 1000.0
    dlc_fraction: Annotated[float, Field(ge=0, le=1)] = 0.02
    period_stride: Optional[int] = None
    validate_nadirs: bool = False
    out: Path

    @classmethod
    def configure_parser(cls, parser: ArgumentParser):
        """Add plan arguments."""
        super().configure_parser(parser)
        parser.add_argument(
            "--system", type=Path, default=SYSTEM_DIR, help="System directory"
        )
        parser.add_argument(
            "--mode", choices=[mode.value for mode in PlanningMode], default="fcec"
        )
        parser.add_argument(
            "--rules",
            type=Path,
            help="Region CSV for every area, or a directory of <area>.csv",
        )
        parser.add_argument("--discount-rate", type=float, default=0.05)
        parser.add_argument("--lifespan", type=int, default=30)
        parser.add_argument("--fault-probability", type=float)
        parser.add_argument("--epc-cost", type=float, default=100.0, help="$/MW")
        parser.add_argument("--dlc-cost", type=float, default=1000.0, help="$/MW")
        parser.add_argument("--dlc-fraction", type=float, default=0.02)
        parser.add_argument(
            "--period-stride", type=int, help="Consider emergencies every k-th period"
        )
        parser.add_argument(
            "--validate",
            dest="validate_nadirs",
            action="store_true",
            help="Re-simulate every emergency and write nadirs.csv",
        )
        parser.add_argument("--out", type=Path, required=True, help="Output directory")

    @property
    def output_dir(self) -> Path:
        """Plan directory."""
        return self.out

    def options(self) -> PlanningOptions:
        """Planning options from the arguments."""
        return PlanningOptions(
            mode=self.mode,
            discount_rate=self.discount_rate,
            lifespan=self.lifespan,
            fault_probability=self.fault_probability,
            costs=EfcCosts(epc=self.epc_cost, dlc=self.dlc_cost),
            dlc_fraction=self.dlc_fraction,
            period_stride=self.period_stride,
        )

    async def handle(self, context: RunContext):
        """Plan."""
        await super().handle(context)
        context.record_input("system", self.system)
        context.record_input("rules", self.rules)
        system = load_system(self.system)
        rules = None
        if self.mode is not PlanningMode.NONFC:
            if self.rules is None:
                raise UsageError("plan --mode {} needs --rules".format(self.mode.value))
            rules = read_rule_sets(self.rules, system.area_ids)
        problem = build_planning_model(system, self.options(), rules)
        result = await solve_plan_async(problem, self.solver_config())
        context.record_artifact(result.to_file(self.out / "plan.json"))
        validation = validate_plan(result, system) if self.validate_nadirs else None
        for path in write_report(result, self.out, validation):
            context.record_artifact(path)


class Report(Command):
    """Validate plans and compare their modes."""

    command_name: ClassVar[str] = REPORT

    plans: List[Path]
    system: Path = SYSTEM_DIR
    out: Path

    @classmethod
    def configure_parser(cls, parser: ArgumentParser):
        """Add report arguments."""
        parser.add_argument("--plans", type=Path, nargs="+", required=True)
        parser.add_argument("--system", type=Path, default=SYSTEM_DIR)
        parser.add_argument("--out", type=Path, required=True, help="Output directory")

    @property
    def output_dir(self) -> Path:
        """Report directory."""
        return self.out

    async def handle(self, context: RunContext):
        """Write per-plan tables and the comparison."""
        await super().handle(context)
        context.record_input("system", self.system)
        system = load_system(self.system)
        runs = {}
        for number, path in enumerate(self.plans):
            context.record_input("plan{}".format(number), path)
            result = PlanResult.load(path)
            validation = validate_plan(result, system)
            name = result.mode.value
            if name in runs:
                name = "{}_{}".format(name, number)
            runs[name] = (result, validation)
            for artifact in write_report(result, self.out / name, validation):
                context.record_artifact(artifact)
        table = compare_modes(runs)
        path = self.out / "comparison.csv"
        self.out.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, float_format=FLOAT_FORMAT, lineterminator="\n")
        context.record_artifact(path)
        LOGGER.info("Compared %d plans", len(runs))
