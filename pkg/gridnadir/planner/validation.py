"""Re-simulation of a plan's emergencies."""

import logging
from typing import Dict, List

import pandas as pd
from pydantic import Field
from typing_extensions import Annotated

from .. import sfr
from ..base import FrozenRecord, Record
from ..efc import NADIR_BOUND, verify_schedule
from .result import PlanResult
from .system import PlanningSystem

LOGGER = logging.getLogger(__name__)


class NadirEntry(FrozenRecord):
    """Re-simulated nadir of one area in one emergency."""

    scenario: str
    period: int
    faulted_line: str
    area: str
    imbalance: float
    nadir: Annotated[float, Field(description="Largest |df|, Hz")]
    secure: bool


class ValidationReport(Record):
    """Every re-simulated nadir of a plan."""

    mode: str
    bound: float = NADIR_BOUND
    entries: List[NadirEntry] = []

    @property
    def violations(self) -> List[NadirEntry]:
        """Entries above the bound."""
        return [entry for entry in self.entries if not entry.secure]

    @property
    def emergency_count(self) -> int:
        """Number of distinct emergencies."""
        return len({(e.scenario, e.period, e.faulted_line) for e in self.entries})

    @property
    def secure_share(self) -> float:
        """Share of emergencies in which every area stays within the bound."""
        count = self.emergency_count
        if not count:
            return 1.0
        insecure = {(e.scenario, e.period, e.faulted_line) for e in self.violations}
        return 1.0 - len(insecure) / count

    def worst(self) -> Dict[str, float]:
        """Largest nadir per area."""
        worst: Dict[str, float] = {}
        for entry in self.entries:
            worst[entry.area] = max(worst.get(entry.area, 0.0), entry.nadir)
        return worst

    @property
    def worst_nadir(self) -> float:
        """Largest nadir over all areas and emergencies."""
        return max((entry.nadir for entry in self.entries), default=0.0)

    def to_frame(self) -> pd.DataFrame:
        """One row per (emergency, area)."""
        columns = list(NadirEntry.__fields__)
        return pd.DataFrame([entry.dict() for entry in self.entries], columns=columns)


def validate_plan(
    result: PlanResult,
    system: PlanningSystem,
    bound: float = NADIR_BOUND,
    epc_delay: float = 0.2,
    dlc_delay: float = 0.6,
    dt: float = sfr.DEFAULT_DT,
    horizon: float = sfr.DEFAULT_HORIZON,
) -> ValidationReport:
    """Simulate every planned emergency with its schedule."""
    installed_ess = dict(result.ess)
    entries = []
    for outcome in result.emergencies:
        commitments = result.commitments(outcome.scenario, outcome.period)
        scenario = next(s for s in system.scenarios if s.id == outcome.scenario)
        models = {
            area: system.area_model(
                area,
                commitments,
                installed_ess,
                total_load=system.area_load(scenario, area, outcome.period),
            )
            for area in system.area_ids
        }
        verification = verify_schedule(
            outcome.schedule,
            models,
            outcome.emergency,
            bound=bound,
            epc_delay=epc_delay,
            dlc_delay=dlc_delay,
            dt=dt,
            horizon=horizon,
        )
        for area, value in verification.nadirs.items():
            entries.append(
                NadirEntry(
                    scenario=outcome.scenario,
                    period=outcome.period,
                    faulted_line=outcome.emergency.faulted_line,
                    area=area,
                    imbalance=outcome.emergency.imbalance(area),
                    nadir=value,
                    secure=area not in verification.violations,
                )
            )
    report = ValidationReport(mode=result.mode.value, bound=bound, entries=entries)
    LOGGER.info(
        "Validated %d emergencies of the %s plan: worst nadir %.3f Hz, %d violations",
        report.emergency_count,
        report.mode,
        report.worst_nadir,
        len(report.violations),
    )
    return report
