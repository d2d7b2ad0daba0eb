"""efc: cheapest secure control for HVDC faults."""

from argparse import ArgumentParser
import logging
from pathlib import Path
from typing import ClassVar, List, Optional

import pandas as pd

from .. import sfr
from ..base import Record, RunContext
from ..base.error import DataError, NoSecureControlError
from ..efc import (
    DEFAULT_EMERGENCY_PROBABILITY,
    AreaResources,
    EfcCosts,
    EfcSchedule,
    EmergencyScenario,
    HvdcLine,
    solve_emergencies,
    verify_schedule,
    write_schedules,
)
from ..wodt import read_rule_sets
from .command_types import EFC
from .solver import SolverCommand

LOGGER = logging.getLogger(__name__)


class EfcCase(Record):
    """Areas, HVDC lines and control costs of an emergency study."""

    areas: List[AreaResources]
    lines: List[HvdcLine]
    costs: EfcCosts = EfcCosts()
    probability: float = DEFAULT_EMERGENCY_PROBABILITY


class Efc(SolverCommand):
    """Solve the emergencies of a case."""

    command_name: ClassVar[str] = EFC

    case: Path
    rules: Path
    faults: Optional[List[str]] = None
    models: Optional[Path] = None
    out: Path

    @classmethod
    def configure_parser(cls, parser: ArgumentParser):
        """Add efc arguments."""
        super().configure_parser(parser)
        parser.add_argument("--case", type=Path, required=True, help="EfcCase JSON")
        parser.add_argument(
            "--rules",
            type=Path,
            required=True,
            help="Region CSV for every area, or a directory of <area>.csv",
        )
        parser.add_argument("--faults", nargs="+", help="Faulted lines; default all")
        parser.add_argument(
            "--models",
            type=Path,
            help="Directory of <area>.json dynamic models to re-simulate schedules",
        )
        parser.add_argument("--out", type=Path, required=True, help="Schedule CSV")

    @property
    def output_dir(self) -> Path:
        """Directory of the schedules."""
        return self.out.parent

    def _verify(self, schedules: List[EfcSchedule], scenarios, context: RunContext):
        models = {
            path.stem: sfr.AreaDynamicModel.from_file(path)
            for path in sorted(self.models.glob("*.json"))
        }
        by_line = {scenario.faulted_line: scenario for scenario in scenarios}
        rows = []
        for schedule in schedules:
            verification = verify_schedule(schedule, models, by_line[schedule.faulted_line])
            rows.extend(
                {
                    "faulted_line": schedule.faulted_line,
                    "area": area,
                    "nadir_hz": value,
                    "secure": area not in verification.violations,
                }
                for area, value in sorted(verification.nadirs.items())
            )
        path = self.out.with_name(self.out.stem + ".verification.csv")
        pd.DataFrame(rows, columns=["faulted_line", "area", "nadir_hz", "secure"]).to_csv(
            path, index=False, float_format="%.10g", lineterminator="\n"
        )
        context.record_artifact(path)

    async def handle(self, context: RunContext):
        """Solve, write and optionally verify the schedules."""
        await super().handle(context)
        context.record_input("case", self.case)
        context.record_input("rules", self.rules)
        context.record_input("models", self.models)
        case = EfcCase.from_file(self.case)
        area_ids = [area.id for area in case.areas]
        rules = read_rule_sets(self.rules, area_ids)
        lines = {line.id: line for line in case.lines}
        faults = self.faults or list(lines)
        unknown = [line for line in faults if line not in lines]
        if unknown:
            raise DataError("Unknown faulted lines {}".format(unknown))
        scenarios = [
            EmergencyScenario.from_fault(lines[line], area_ids, case.probability)
            for line in faults
        ]
        results = await solve_emergencies(
            case.areas,
            case.lines,
            scenarios,
            rules,
            case.costs,
            self.solver_config(),
            self.jobs,
        )
        schedules = [item for item in results if isinstance(item, EfcSchedule)]
        failures = [item for item in results if isinstance(item, NoSecureControlError)]
        context.record_artifact(write_schedules(schedules, self.out))
        if self.models is not None:
            self._verify(schedules, scenarios, context)
        if failures:
            raise NoSecureControlError(
                "No secure control for faults on {}".format(
                    ", ".join(error.emergency.faulted_line for error in failures)
                ),
                emergency=failures[0].emergency,
            )
