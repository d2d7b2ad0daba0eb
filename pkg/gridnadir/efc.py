"""Coordinated emergency frequency control for one HVDC fault.

EPC re-dispatches surviving HVDC lines and DLC sheds load per area. The
cheapest schedule is found with a MILP whose frequency requirement is the
embedded set of secure regions of each area.
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Union

import pandas as pd
from pydantic import Field, root_validator
from typing_extensions import Annotated

from . import sfr
from .aggregation import EquivalentParams
from .base import FrozenRecord, Record
from .base.error import DataError, NoSecureControlError, SolverExitError
from .milp import (
    Expression,
    MilpModel,
    RegionEmbedding,
    Solution,
    SolverConfig,
    SolveStatus,
    Var,
    add_abs_linearization,
    embed_secure_regions,
    run_blocking,
    solve_async,
    solve_many,
)
from .wodt import SecureRegion

LOGGER = logging.getLogger(__name__)

DEFAULT_EMERGENCY_PROBABILITY = 1e-4
NADIR_BOUND = 0.5


class HvdcLine(FrozenRecord):
    """Inter-area HVDC link with its pre-fault operating point."""

    id: str
    from_area: str
    to_area: str
    capacity: Annotated[float, Field(description="MW", ge=0)]
    prefault_flow: Annotated[float, Field(description="MW, from -> to positive")] = 0.0
    epc_max: Annotated[
        Optional[float], Field(description="EPC headroom override, MW", ge=0)
    ] = None

    @root_validator(skip_on_failure=True)
    @classmethod
    def _flow_within_capacity(cls, values):
        if abs(values["prefault_flow"]) > values["capacity"] + 1e-9:
            raise ValueError(
                "line {} pre-fault flow {} exceeds capacity {}".format(
                    values["id"], values["prefault_flow"], values["capacity"]
                )
            )
        return values

    @property
    def headroom(self) -> float:
        """EPC magnitude limit."""
        if self.epc_max is not None:
            return self.epc_max
        return self.capacity - abs(self.prefault_flow)

    def indicator(self, area: str) -> int:
        """-1 at the origin area, +1 at the terminus, 0 elsewhere."""
        if area == self.from_area:
            return -1
        if area == self.to_area:
            return 1
        return 0


class EmergencyScenario(FrozenRecord):
    """Initial area imbalances caused by one line fault."""

    faulted_line: str
    imbalances: Dict[str, float] = Field(description="dP_D per area, MW")
    probability: Annotated[float, Field(ge=0, le=1)] = DEFAULT_EMERGENCY_PROBABILITY

    @root_validator(skip_on_failure=True)
    @classmethod
    def _balanced(cls, values):
        imbalances = values["imbalances"]
        scale = max([1.0] + [abs(value) for value in imbalances.values()])
        if abs(sum(imbalances.values())) > 1e-9 * scale:
            raise ValueError("area imbalances of a line fault must sum to zero")
        return values

    @classmethod
    def from_fault(
        cls,
        line: HvdcLine,
        areas: Sequence[str] = (),
        probability: float = DEFAULT_EMERGENCY_PROBABILITY,
        flow: Optional[float] = None,
    ) -> "EmergencyScenario":
        """Surplus at the sending end, shortage at the receiving end."""
        flow = line.prefault_flow if flow is None else flow
        imbalances = {area: 0.0 for area in areas}
        imbalances[line.from_area] = float(flow)
        imbalances[line.to_area] = -float(flow)
        return cls(faulted_line=line.id, imbalances=imbalances, probability=probability)

    def imbalance(self, area: str) -> float:
        """dP_D of an area."""
        return self.imbalances.get(area, 0.0)


class AreaResources(FrozenRecord):
    """Frequency-support capability and DLC limit of an area."""

    id: str
    params: EquivalentParams
    dlc_max: Annotated[float, Field(description="MW", ge=0)] = 0.0


class EfcCosts(FrozenRecord):
    """Control costs in $/MW."""

    epc: Annotated[float, Field(ge=0)] = 100.0
    dlc: Annotated[float, Field(ge=0)] = 1000.0


class EfcSchedule(Record):
    """Control actions for one emergency."""

    faulted_line: str
    epc: Dict[str, float] = Field(description="Signed EPC per line, MW")
    dlc: Dict[str, float] = Field(description="DLC per area, MW")
    area_epc: Dict[str, float] = Field(description="Net EPC injection per area, MW")
    cost: float

    def action(
        self, area: str, epc_delay: float = 0.2, dlc_delay: float = 0.6
    ) -> sfr.EfcAction:
        """The area's view of the schedule."""
        return sfr.EfcAction(
            epc_power=self.area_epc.get(area, 0.0),
            dlc_power=max(0.0, self.dlc.get(area, 0.0)),
            epc_delay=epc_delay,
            dlc_delay=dlc_delay,
        )

    def to_frame(self) -> pd.DataFrame:
        """One row per control resource."""
        rows = [
            {"kind": "epc", "resource": line, "power_mw": power}
            for line, power in sorted(self.epc.items())
        ] + [
            {"kind": "dlc", "resource": area, "power_mw": power}
            for area, power in sorted(self.dlc.items())
        ]
        return pd.DataFrame(rows, columns=["kind", "resource", "power_mw"])


class Verification(FrozenRecord):
    """Re-simulated nadirs of a schedule."""

    faulted_line: str
    nadirs: Dict[str, float] = Field(description="Hz")
    bound: float = NADIR_BOUND
    violations: List[str] = []

    @property
    def secure(self) -> bool:
        """Whether every area stays within the bound."""
        return not self.violations


class EfcProblem(NamedTuple):
    """Built model with handles to the control variables."""

    model: MilpModel
    scenario: EmergencyScenario
    epc: Dict[str, Var]
    dlc: Dict[str, Var]
    area_epc: Dict[str, Expression]
    embeddings: Dict[str, RegionEmbedding]


def build_efc_problem(
    areas: Sequence[AreaResources],
    lines: Sequence[HvdcLine],
    scenario: EmergencyScenario,
    rules: Mapping[str, Sequence[SecureRegion]],
    costs: Optional[EfcCosts] = None,
    epc_max: Optional[Mapping[str, float]] = None,
    dlc_max: Optional[Mapping[str, float]] = None,
) -> EfcProblem:
    """Minimum-cost EPC and DLC keeping every area inside a secure region."""
    costs = costs or EfcCosts()
    epc_max = dict(epc_max or {})
    dlc_max = dict(dlc_max or {})
    line_ids = {line.id for line in lines}
    if scenario.faulted_line not in line_ids:
        raise DataError("Faulted line {} is not a known line".format(scenario.faulted_line))
    for area in areas:
        if area.id not in rules:
            raise DataError("No frequency rules for area {}".format(area.id))
        if not rules[area.id]:
            raise NoSecureControlError(
                "Area {} has no secure region".format(area.id), emergency=scenario
            )
    for label, limit in list(epc_max.items()) + list(dlc_max.items()):
        if limit < 0:
            raise DataError("Negative headroom declared for {}".format(label))

    model = MilpModel("efc_{}".format(scenario.faulted_line))
    objective: Expression = 0.0
    epc_vars: Dict[str, Var] = {}
    area_epc: Dict[str, Expression] = {area.id: 0.0 for area in areas}
    for line in lines:
        if line.id == scenario.faulted_line:
            continue
        headroom = epc_max.get(line.id, line.headroom)
        var = model.add_var(
            "epc_{}".format(line.id), lower=-headroom, upper=headroom
        )
        epc_vars[line.id] = var
        plus, minus = add_abs_linearization(model, var, "epc_{}".format(line.id))
        objective += costs.epc * (plus + minus)
        # post-fault flow stays within the line rating
        model.add_constraint(
            var, "<=", line.capacity - line.prefault_flow, name="flow_max_{}".format(line.id)
        )
        model.add_constraint(
            var, ">=", -line.capacity - line.prefault_flow, name="flow_min_{}".format(line.id)
        )
        for area_id in (line.from_area, line.to_area):
            if area_id in area_epc:
                area_epc[area_id] += line.indicator(area_id) * var

    dlc_vars: Dict[str, Var] = {}
    embeddings: Dict[str, RegionEmbedding] = {}
    for area in areas:
        dlc = model.add_var(
            "dlc_{}".format(area.id), lower=0.0, upper=dlc_max.get(area.id, area.dlc_max)
        )
        dlc_vars[area.id] = dlc
        objective += costs.dlc * dlc
        features = [
            area.params.inertia,
            area.params.d_fast,
            area.params.d_slow,
            area_epc[area.id],
            dlc,
            scenario.imbalance(area.id),
        ]
        try:
            embeddings[area.id] = embed_secure_regions(
                model, features, rules[area.id], prefix="freq_{}".format(area.id)
            )
        except NoSecureControlError as err:
            raise NoSecureControlError(
                "No secure EFC exists for the fault on {}: {}".format(
                    scenario.faulted_line, err.message
                ),
                emergency=scenario,
            ) from err
    model.set_objective(objective)
    LOGGER.debug("Built %r for emergency on %s", model, scenario.faulted_line)
    return EfcProblem(model, scenario, epc_vars, dlc_vars, area_epc, embeddings)


def extract_schedule(problem: EfcProblem, solution: Solution) -> EfcSchedule:
    """Schedule from a solved problem; infeasibility is a domain error."""
    scenario = problem.scenario
    if solution.status is SolveStatus.INFEASIBLE:
        raise NoSecureControlError(
            "No secure EFC exists for the fault on {}".format(scenario.faulted_line),
            emergency=scenario,
        )
    if not solution.incumbent:
        raise SolverExitError(
            "Solver returned {} without an incumbent schedule for {}".format(
                solution.status.value, scenario.faulted_line
            )
        )
    return EfcSchedule(
        faulted_line=scenario.faulted_line,
        epc={line: solution.value(var) for line, var in problem.epc.items()},
        dlc={area: solution.value(var) for area, var in problem.dlc.items()},
        area_epc={
            area: solution.evaluate(expr)
            for area, expr in problem.area_epc.items()
        },
        cost=solution.objective,
    )


async def solve_efc_async(
    problem: EfcProblem, config: Optional[SolverConfig] = None
) -> EfcSchedule:
    """Solve one emergency."""
    solution = await solve_async(problem.model, config)
    return extract_schedule(problem, solution)


def solve_efc(problem: EfcProblem, config: Optional[SolverConfig] = None) -> EfcSchedule:
    """Blocking wrapper of solve_efc_async.

    Runs its own event loop; inside a running loop await solve_efc_async.
    """
    return run_blocking(solve_efc_async(problem, config), "solve_efc_async")


async def solve_emergencies(
    areas: Sequence[AreaResources],
    lines: Sequence[HvdcLine],
    scenarios: Sequence[EmergencyScenario],
    rules: Mapping[str, Sequence[SecureRegion]],
    costs: Optional[EfcCosts] = None,
    config: Optional[SolverConfig] = None,
    jobs: int = 1,
) -> List[Union[EfcSchedule, NoSecureControlError]]:
    """Solve emergencies concurrently; insecure ones yield their error."""
    results: List[Union[EfcSchedule, NoSecureControlError, None]] = []
    problems: List[EfcProblem] = []
    for scenario in scenarios:
        try:
            problems.append(build_efc_problem(areas, lines, scenario, rules, costs))
            results.append(None)
        except NoSecureControlError as err:
            LOGGER.warning("%s", err.message)
            results.append(err)
    solutions = iter(
        await solve_many([problem.model for problem in problems], config, jobs)
    )
    pending = iter(problems)
    for position, result in enumerate(results):
        if result is not None:
            continue
        try:
            results[position] = extract_schedule(next(pending), next(solutions))
        except NoSecureControlError as err:
            LOGGER.warning("%s", err.message)
            results[position] = err
    return results


def verify_schedule(
    schedule: EfcSchedule,
    models: Mapping[str, sfr.AreaDynamicModel],
    scenario: EmergencyScenario,
    bound: float = NADIR_BOUND,
    epc_delay: float = 0.2,
    dlc_delay: float = 0.6,
    dt: float = sfr.DEFAULT_DT,
    horizon: float = sfr.DEFAULT_HORIZON,
) -> Verification:
    """Re-simulate each area under the schedule and report the nadirs."""
    nadirs, violations = {}, []
    for area, model in models.items():
        trace = sfr.simulate(
            model,
            scenario.imbalance(area),
            schedule.action(area, epc_delay, dlc_delay),
            dt=dt,
            horizon=horizon,
        )
        nadirs[area] = sfr.nadir(trace)[0]
        if nadirs[area] > bound:
            violations.append(area)
    if violations:
        LOGGER.warning(
            "Schedule for %s leaves areas %s above %.2f Hz",
            schedule.faulted_line,
            ", ".join(violations),
            bound,
        )
    return Verification(
        faulted_line=schedule.faulted_line, nadirs=nadirs, bound=bound, violations=violations
    )


def write_schedules(schedules: Sequence[EfcSchedule], path: Union[str, Path]) -> Path:
    """CSV table of every schedule's actions."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames = []
    for schedule in schedules:
        frame = schedule.to_frame()
        frame.insert(0, "faulted_line", schedule.faulted_line)
        frames.append(frame)
    table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=["faulted_line", "kind", "resource", "power_mw"]
    )
    table.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path
