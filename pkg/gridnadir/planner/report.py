"""Plan tables and the mode comparison."""

import logging
from pathlib import Path
from typing import List, Mapping, Optional, Tuple, Union

import pandas as pd

from .result import PlanResult
from .validation import ValidationReport

LOGGER = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
COMPARISON_COSTS = ("total_cost", "investment_cost", "operational_cost")


def installation_table(result: PlanResult) -> pd.DataFrame:
    """Candidate HVDC lines and storage with their decisions."""
    rows = [
        {
            "kind": "hvdc",
            "id": item.id,
            "built": item.built,
            "increments": item.increments,
            "capacity_mw": item.capacity,
        }
        for item in result.hvdc
    ] + [
        {"kind": "ess", "id": unit, "built": built, "increments": 0, "capacity_mw": 0.0}
        for unit, built in sorted(result.ess.items())
    ]
    return pd.DataFrame(rows, columns=["kind", "id", "built", "increments", "capacity_mw"])


def cost_table(result: PlanResult) -> pd.DataFrame:
    """Annualized cost breakdown."""
    costs = result.costs
    return pd.DataFrame(
        [
            {
                "mode": result.mode.value,
                "investment": costs.investment,
                "operational": costs.operational,
                "emergency": costs.emergency,
                "total": costs.total,
            }
        ]
    )


def emergency_table(result: PlanResult) -> pd.DataFrame:
    """Planned response of every area in every emergency."""
    rows = []
    for outcome in result.emergencies:
        schedule = outcome.schedule
        for area, imbalance in sorted(outcome.emergency.imbalances.items()):
            rows.append(
                {
                    "scenario": outcome.scenario,
                    "period": outcome.period,
                    "faulted_line": schedule.faulted_line,
                    "area": area,
                    "imbalance_mw": imbalance,
                    "epc_mw": schedule.area_epc.get(area, 0.0),
                    "dlc_mw": schedule.dlc.get(area, 0.0),
                    "region": outcome.regions.get(area, -1),
                    "cost": schedule.cost,
                }
            )
    return pd.DataFrame(
        rows,
        columns=[
            "scenario",
            "period",
            "faulted_line",
            "area",
            "imbalance_mw",
            "epc_mw",
            "dlc_mw",
            "region",
            "cost",
        ],
    )


def _write(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_report(
    result: PlanResult,
    directory: Union[str, Path],
    validation: Optional[ValidationReport] = None,
) -> List[Path]:
    """Write the plan tables as CSV files into directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [
        _write(installation_table(result), directory / "installations.csv"),
        _write(cost_table(result), directory / "costs.csv"),
        _write(emergency_table(result), directory / "emergencies.csv"),
    ]
    if validation is not None:
        paths.append(_write(validation.to_frame(), directory / "nadirs.csv"))
    LOGGER.info("Wrote %d report tables to %s", len(paths), directory)
    return paths


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    """Read a table written by write_report."""
    return pd.read_csv(path)


def compare_modes(
    runs: Mapping[str, Tuple[PlanResult, ValidationReport]]
) -> pd.DataFrame:
    """Cost and worst per-area deviation of each planning mode."""
    areas = sorted({area for _, report in runs.values() for area in report.worst()})
    rows = []
    for mode, (result, report) in runs.items():
        worst = report.worst()
        row = {
            "mode": mode,
            "total_cost": result.costs.total,
            "investment_cost": result.costs.investment,
            "operational_cost": result.costs.operational,
        }
        for area in areas:
            row["max_deviation_{}".format(area)] = worst.get(area, 0.0)
        rows.append(row)
    columns = ["mode", *COMPARISON_COSTS, *("max_deviation_{}".format(a) for a in areas)]
    return pd.DataFrame(rows, columns=columns).set_index("mode")
