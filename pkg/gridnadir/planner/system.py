"""Planning system description and its loader.

A system is a directory of JSON documents: buses.json, lines.json,
units.json, candidates.json, scenarios.json and emergencies.json.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import Field, root_validator, validator
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from typing_extensions import Annotated

from .. import sfr
from ..base import FrozenRecord, Record
from ..base.error import DataError
from ..valid import Fraction

LOGGER = logging.getLogger(__name__)

SYSTEM_FILES = (
    "buses.json",
    "lines.json",
    "units.json",
    "candidates.json",
    "scenarios.json",
    "emergencies.json",
)

NonNegative = Annotated[float, Field(ge=0)]


class Area(FrozenRecord):
    """Synchronous AC area."""

    id: str
    damping_per_load: Annotated[
        float, Field(description="D_load per MW of load, MW per p.u. per MW", ge=0)
    ] = 1.0
    base_frequency: Annotated[float, Field(gt=0)] = sfr.DEFAULT_BASE_FREQUENCY
    fixed_inertia: Annotated[float, Field(description="MW*s", ge=0)] = 0.0


class Bus(FrozenRecord):
    """Network node."""

    id: str
    area: str


class AcLine(FrozenRecord):
    """AC branch with DC power flow ``B (theta_from - theta_to)``."""

    id: str
    from_bus: str
    to_bus: str
    susceptance: Annotated[float, Field(description="B_l, MW per rad", gt=0)]
    capacity: Annotated[float, Field(description="MW", gt=0)]


class DcLine(FrozenRecord):
    """Existing HVDC link."""

    id: str
    from_bus: str
    to_bus: str
    capacity: Annotated[float, Field(description="P_DC,max, MW", gt=0)]


class CostSegment(FrozenRecord):
    """Block of output above P_min at a constant marginal cost."""

    size: Annotated[float, Field(description="MW", gt=0)]
    marginal_cost: Annotated[float, Field(description="$/MWh", ge=0)]


class ThermalUnit(FrozenRecord):
    """Thermal generator: economics and primary-response dynamics."""

    id: str
    bus: str
    p_min: NonNegative
    p_max: Annotated[float, Field(gt=0)]
    ramp_up: Annotated[float, Field(description="MW per period", gt=0)]
    ramp_down: Annotated[float, Field(description="MW per period", gt=0)]
    min_on: Annotated[int, Field(description="periods", ge=1)] = 1
    min_off: Annotated[int, Field(description="periods", ge=1)] = 1
    startup_cost: NonNegative = 0.0
    shutdown_cost: NonNegative = 0.0
    no_load_cost: Annotated[float, Field(description="$/h at P_min", ge=0)] = 0.0
    segments: List[CostSegment] = []
    inertia_const: Annotated[float, Field(description="H_k in s", ge=0)]
    droop: Annotated[float, Field(gt=0)] = 0.06
    hp_fraction: Fraction = 0.3
    gov_tc: Annotated[float, Field(gt=0)] = 0.5
    chest_tc: Annotated[float, Field(gt=0)] = 0.5
    reheat_tc: Annotated[float, Field(gt=0)] = 12.0

    @root_validator(skip_on_failure=True)
    @classmethod
    def _cost_curve(cls, values):
        if values["p_min"] > values["p_max"]:
            raise ValueError("unit {}: p_min exceeds p_max".format(values["id"]))
        segments = values["segments"]
        span = values["p_max"] - values["p_min"]
        if not segments and span > 0:
            raise ValueError("unit {}: cost segments must cover p_max - p_min".format(
                values["id"]
            ))
        if segments and abs(sum(seg.size for seg in segments) - span) > 1e-6:
            raise ValueError("unit {}: cost segment sizes must sum to {}".format(
                values["id"], span
            ))
        costs = [seg.marginal_cost for seg in segments]
        if costs != sorted(costs):
            raise ValueError("unit {}: marginal costs must be nondecreasing".format(
                values["id"]
            ))
        return values

    def dynamics(self, committed: bool = True) -> sfr.ThermalUnitDyn:
        """Frequency-response model of the unit."""
        return sfr.ThermalUnitDyn(
            inertia_const=self.inertia_const,
            p_max=self.p_max,
            droop=self.droop,
            hp_fraction=self.hp_fraction,
            gov_tc=self.gov_tc,
            chest_tc=self.chest_tc,
            reheat_tc=self.reheat_tc,
            committed=committed,
        )


class HydroUnit(FrozenRecord):
    """Always-online hydro generator."""

    id: str
    bus: str
    p_max: Annotated[float, Field(gt=0)]
    marginal_cost: NonNegative = 0.0
    inertia_const: Annotated[float, Field(gt=0)] = 3.0
    perm_droop: Annotated[float, Field(gt=0)] = 0.08
    temp_droop: Annotated[float, Field(gt=0)] = 0.3
    gov_tc: Annotated[float, Field(gt=0)] = 0.5
    reset_tc: Annotated[float, Field(gt=0)] = 12.0
    water_tc: Annotated[float, Field(gt=0)] = 0.4

    def dynamics(self) -> sfr.HydroUnitDyn:
        """Frequency-response model of the unit."""
        return sfr.HydroUnitDyn(
            **self.dict(exclude={"id", "bus", "marginal_cost"})
        )


class RenewableUnit(FrozenRecord):
    """Non-dispatchable PV or wind plant; curtailment is free."""

    id: str
    bus: str
    kind: str = "pv"


class CandidateHvdc(FrozenRecord):
    """HVDC link that may be built with a discrete capacity."""

    id: str
    from_bus: str
    to_bus: str
    length: Annotated[float, Field(description="L_l, km", ge=0)] = 0.0
    fixed_cost: Annotated[float, Field(description="C_FIX, $", ge=0)]
    capacity_cost: Annotated[float, Field(description="C_CAP, $/MW", ge=0)]
    p_cap_min: Annotated[float, Field(description="MW", ge=0)]
    p_cap_max: Annotated[float, Field(description="MW", gt=0)]
    cap_increment: Annotated[float, Field(description="dP_CAP, MW", gt=0)]

    @root_validator(skip_on_failure=True)
    @classmethod
    def _capacity_range(cls, values):
        if values["p_cap_min"] > values["p_cap_max"]:
            raise ValueError("candidate {}: p_cap_min exceeds p_cap_max".format(values["id"]))
        return values

    @property
    def max_increments(self) -> int:
        """Largest useful n."""
        return int((self.p_cap_max - self.p_cap_min) // self.cap_increment + 1e-9)


class CandidateEss(FrozenRecord):
    """Energy storage that may be installed."""

    id: str
    bus: str
    p_charge_max: Annotated[float, Field(gt=0)]
    p_discharge_max: Annotated[float, Field(gt=0)]
    e_min: NonNegative = 0.0
    e_max: Annotated[float, Field(gt=0)]
    initial_soc: Fraction = 0.5
    eta_charge: Annotated[float, Field(gt=0, le=1)] = 0.9
    eta_discharge: Annotated[float, Field(gt=0, le=1)] = 0.9
    investment_cost: Annotated[float, Field(description="C_INV,ESS, $", ge=0)]
    droop: Annotated[float, Field(gt=0)] = 0.05
    delay_tc: Annotated[float, Field(gt=0)] = 0.5

    @validator("e_max")
    @classmethod
    def _energy_range(cls, value, values):
        if "e_min" in values and values["e_min"] > value:
            raise ValueError("e_min exceeds e_max")
        return value

    def dynamics(self) -> sfr.StorageUnitDyn:
        """Frequency-response model when installed."""
        return sfr.StorageUnitDyn(
            p_max=max(self.p_charge_max, self.p_discharge_max),
            droop=self.droop,
            delay_tc=self.delay_tc,
        )


class Scenario(FrozenRecord):
    """Representative day with its annual weight."""

    id: str
    weight: Annotated[float, Field(description="pi_s in day-equivalents per year", ge=0)]
    loads: Dict[str, List[float]] = Field(description="MW per bus per period")
    renewables: Dict[str, List[float]] = Field(
        {}, description="available MW per renewable unit per period"
    )

    @property
    def periods(self) -> int:
        """Number of periods."""
        return len(next(iter(self.loads.values()))) if self.loads else 0


class ScenarioSet(Record):
    """All representative scenarios."""

    period_hours: Annotated[float, Field(gt=0)] = 1.0
    scenarios: List[Scenario]


class EmergencySettings(FrozenRecord):
    """Which HVDC faults are considered and how likely they are."""

    probability: Annotated[float, Field(description="pi_e per line per period", ge=0, le=1)] = (
        1e-4
    )
    period_stride: Annotated[int, Field(ge=1)] = 1
    lines: Optional[List[str]] = None


class BusFile(Record):
    """buses.json."""

    areas: List[Area]
    buses: List[Bus]


class LineFile(Record):
    """lines.json."""

    ac: List[AcLine] = []
    dc: List[DcLine] = []


class UnitFile(Record):
    """units.json."""

    thermal: List[ThermalUnit] = []
    hydro: List[HydroUnit] = []
    renewable: List[RenewableUnit] = []


class CandidateFile(Record):
    """candidates.json."""

    hvdc: List[CandidateHvdc] = []
    ess: List[CandidateEss] = []


def _check_ac_islands(bus_areas: Dict[str, str], ac_lines: List[AcLine]):
    """Raise when the AC lines leave an area's buses in more than one island."""
    index = {bus: number for number, bus in enumerate(bus_areas)}
    rows = [index[line.from_bus] for line in ac_lines]
    cols = [index[line.to_bus] for line in ac_lines]
    graph = sparse.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(len(index), len(index))
    )
    _, labels = connected_components(graph, directed=False)
    names = list(bus_areas)
    for area in dict.fromkeys(bus_areas.values()):
        members = [number for number, bus in enumerate(names) if bus_areas[bus] == area]
        islands: Dict[int, List[str]] = {}
        for number in members:
            islands.setdefault(int(labels[number]), []).append(names[number])
        if len(islands) > 1:
            detached = sorted(islands.values(), key=len)[0]
            raise ValueError(
                "area {} is not AC-connected; buses {} form an island".format(
                    area, sorted(detached)
                )
            )


class PlanningSystem(Record):
    """Resolved planning system."""

    areas: List[Area]
    buses: List[Bus]
    ac_lines: List[AcLine] = []
    dc_lines: List[DcLine] = []
    thermal: List[ThermalUnit] = []
    hydro: List[HydroUnit] = []
    renewable: List[RenewableUnit] = []
    hvdc_candidates: List[CandidateHvdc] = []
    ess_candidates: List[CandidateEss] = []
    scenarios: List[Scenario]
    period_hours: float = 1.0
    emergencies: EmergencySettings = EmergencySettings()

    @root_validator(skip_on_failure=True)
    @classmethod
    def _references_resolve(cls, values):
        areas = {area.id for area in values["areas"]}
        buses = {}
        for bus in values["buses"]:
            if bus.area not in areas:
                raise ValueError("bus {} refers to unknown area {}".format(bus.id, bus.area))
            buses[bus.id] = bus.area

        def check_bus(owner: str, bus: str):
            if bus not in buses:
                raise ValueError("{} refers to unknown bus {}".format(owner, bus))

        for line in values["ac_lines"]:
            check_bus("AC line " + line.id, line.from_bus)
            check_bus("AC line " + line.id, line.to_bus)
            if buses[line.from_bus] != buses[line.to_bus]:
                raise ValueError("AC line {} joins two areas".format(line.id))
        _check_ac_islands(buses, values["ac_lines"])
        for line in list(values["dc_lines"]) + list(values["hvdc_candidates"]):
            check_bus("HVDC line " + line.id, line.from_bus)
            check_bus("HVDC line " + line.id, line.to_bus)
            if buses[line.from_bus] == buses[line.to_bus]:
                raise ValueError("HVDC line {} does not join two areas".format(line.id))
        for group in ("thermal", "hydro", "renewable", "ess_candidates"):
            for unit in values[group]:
                check_bus("unit " + unit.id, unit.bus)
        ids = [
            item.id
            for group in ("ac_lines", "dc_lines", "hvdc_candidates")
            for item in values[group]
        ]
        duplicates = sorted({item for item in ids if ids.count(item) > 1})
        if duplicates:
            raise ValueError("duplicate line ids {}".format(duplicates))
        renewables = {unit.id for unit in values["renewable"]}
        lengths = set()
        for scenario in values["scenarios"]:
            for bus, series in scenario.loads.items():
                check_bus("scenario " + scenario.id, bus)
                lengths.add(len(series))
            for unit, series in scenario.renewables.items():
                if unit not in renewables:
                    raise ValueError(
                        "scenario {} refers to unknown renewable unit {}".format(
                            scenario.id, unit
                        )
                    )
                lengths.add(len(series))
        if len(lengths) > 1:
            raise ValueError("scenario series have different lengths {}".format(sorted(lengths)))
        lines = values["emergencies"].lines
        if lines is not None:
            known = {line.id for line in values["dc_lines"]} | {
                line.id for line in values["hvdc_candidates"]
            }
            unknown = sorted(set(lines) - known)
            if unknown:
                raise ValueError("emergencies refer to unknown HVDC lines {}".format(unknown))
        return values

    @property
    def area_ids(self) -> List[str]:
        """Area ids in file order."""
        return [area.id for area in self.areas]

    @property
    def bus_area(self) -> Dict[str, str]:
        """Area of every bus."""
        return {bus.id: bus.area for bus in self.buses}

    @property
    def periods(self) -> int:
        """Periods per scenario."""
        return self.scenarios[0].periods if self.scenarios else 0

    def area(self, area_id: str) -> Area:
        """Area by id."""
        for area in self.areas:
            if area.id == area_id:
                return area
        raise DataError("Unknown area {}".format(area_id))

    def hvdc_endpoints(self, line_id: str) -> Tuple[str, str]:
        """(from area, to area) of an existing or candidate HVDC line."""
        areas = self.bus_area
        for line in list(self.dc_lines) + list(self.hvdc_candidates):
            if line.id == line_id:
                return areas[line.from_bus], areas[line.to_bus]
        raise DataError("Unknown HVDC line {}".format(line_id))

    def epc_headroom(self, area_id: str, faulted: Optional[str] = None) -> float:
        """Largest net EPC the area can receive over its surviving HVDC lines.

        A line reverses at most from minus to plus its largest rating, so each
        incident line contributes twice that rating.
        """
        self.area(area_id)
        areas = self.bus_area
        ratings = [
            (line.id, line.from_bus, line.to_bus, line.capacity) for line in self.dc_lines
        ]
        ratings += [
            (cand.id, cand.from_bus, cand.to_bus, cand.p_cap_max)
            for cand in self.hvdc_candidates
        ]
        return sum(
            2.0 * rating
            for line_id, from_bus, to_bus, rating in ratings
            if line_id != faulted and area_id in (areas[from_bus], areas[to_bus])
        )

    def area_load(self, scenario: Scenario, area_id: str, period: int) -> float:
        """Total load of an area in one period."""
        areas = self.bus_area
        return sum(
            series[period] for bus, series in scenario.loads.items() if areas[bus] == area_id
        )

    def area_model(
        self,
        area_id: str,
        commitments: Dict[str, bool],
        installed_ess: Optional[Dict[str, bool]] = None,
        total_load: float = 0.0,
    ) -> sfr.AreaDynamicModel:
        """Frequency-response model of an area in one operating state."""
        installed_ess = installed_ess or {}
        areas = self.bus_area
        area = self.area(area_id)
        return sfr.AreaDynamicModel(
            thermal=[
                unit.dynamics(commitments.get(unit.id, False))
                for unit in self.thermal
                if areas[unit.bus] == area_id
            ],
            hydro=[unit.dynamics() for unit in self.hydro if areas[unit.bus] == area_id],
            storage=[
                unit.dynamics()
                for unit in self.ess_candidates
                if areas[unit.bus] == area_id and installed_ess.get(unit.id, False)
            ],
            load_damping=area.damping_per_load * total_load,
            base_frequency=area.base_frequency,
            fixed_inertia=area.fixed_inertia,
        )


def load_system(directory: Union[str, Path]) -> PlanningSystem:
    """Read and cross-check a system directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError("System directory not found: {}".format(directory))
    missing = [name for name in SYSTEM_FILES if not (directory / name).exists()]
    if missing:
        raise DataError("System directory {} lacks {}".format(directory, ", ".join(missing)))
    buses = BusFile.from_file(directory / "buses.json")
    lines = LineFile.from_file(directory / "lines.json")
    units = UnitFile.from_file(directory / "units.json")
    candidates = CandidateFile.from_file(directory / "candidates.json")
    scenarios = ScenarioSet.from_file(directory / "scenarios.json")
    emergencies = EmergencySettings.from_file(directory / "emergencies.json")
    system = PlanningSystem.deserialize(
        {
            "areas": buses.serialize()["areas"],
            "buses": buses.serialize()["buses"],
            "ac_lines": lines.serialize()["ac"],
            "dc_lines": lines.serialize()["dc"],
            "thermal": units.serialize()["thermal"],
            "hydro": units.serialize()["hydro"],
            "renewable": units.serialize()["renewable"],
            "hvdc_candidates": candidates.serialize()["hvdc"],
            "ess_candidates": candidates.serialize()["ess"],
            "scenarios": scenarios.serialize()["scenarios"],
            "period_hours": scenarios.period_hours,
            "emergencies": emergencies.serialize(),
        }
    )
    LOGGER.info(
        "Loaded system %s: %d areas, %d buses, %d scenarios x %d periods",
        directory,
        len(system.areas),
        len(system.buses),
        len(system.scenarios),
        system.periods,
    )
    return system
