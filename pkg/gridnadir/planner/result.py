"""Solving a planning model and reading the plan back out."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import Field, root_validator, validator
from typing_extensions import Annotated

from ..base import FrozenRecord, Record
from ..base.error import InfeasibleError, SolverExitError
from ..definition import current_version, is_supported
from ..efc import EfcSchedule, EmergencyScenario
from ..milp import Solution, SolverConfig, SolveStatus, run_blocking, solve_async
from .formulation import PlanningMode, PlanningProblem, emergency_lines

LOGGER = logging.getLogger(__name__)

NULL_FLOW = 1e-6

INFEASIBLE_HINTS = {
    PlanningMode.NONFC: "load cannot be served within network and unit limits",
    PlanningMode.FC: "local primary response cannot secure every HVDC fault; "
    "retry with mode fcec or richer frequency rules",
    PlanningMode.FCEC: "no combination of investment, commitment and emergency "
    "control keeps every area inside a secure region",
}


class HvdcInstallation(FrozenRecord):
    """Decision for one candidate HVDC line."""

    id: str
    built: bool
    increments: Annotated[int, Field(ge=0)]
    capacity: Annotated[float, Field(description="P_CAP, MW", ge=0)]


class CostBreakdown(FrozenRecord):
    """Annualized cost components in $."""

    investment: float
    operational: float
    emergency: float
    total: float

    @root_validator(skip_on_failure=True)
    @classmethod
    def _total_is_sum(cls, values):
        parts = values["investment"] + values["operational"] + values["emergency"]
        if abs(parts - values["total"]) > 1e-6 * max(1.0, abs(parts)):
            raise ValueError("total cost must equal the sum of its parts")
        return values


class DispatchEntry(FrozenRecord):
    """Output of one unit in one scenario period."""

    scenario: str
    period: int
    unit: str
    committed: bool
    output: float


class FlowEntry(FrozenRecord):
    """Pre-fault HVDC flow in one scenario period."""

    scenario: str
    period: int
    line: str
    flow: float


class EmergencyOutcome(FrozenRecord):
    """Planned response to one HVDC fault."""

    scenario: str
    period: int
    emergency: EmergencyScenario
    schedule: EfcSchedule
    regions: Dict[str, int] = Field({}, description="Selected secure region per area")


class PlanResult(Record):
    """Solved plan with its cost breakdown."""

    version: str = current_version("plan")
    mode: PlanningMode
    status: SolveStatus
    objective: float
    costs: CostBreakdown
    hvdc: List[HvdcInstallation] = []
    ess: Dict[str, bool] = {}
    dispatch: List[DispatchEntry] = []
    flows: List[FlowEntry] = []
    shed: Dict[str, float] = Field({}, description="Shed energy per scenario, MWh")
    emergencies: List[EmergencyOutcome] = []
    solver: str = ""

    @validator("version")
    @classmethod
    def _supported(cls, value):
        if not is_supported("plan", value):
            raise ValueError("unsupported plan version {}".format(value))
        return value

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PlanResult":
        """Read a plan.json."""
        return cls.from_file(path)

    def installed_lines(self) -> List[str]:
        """Ids of built candidate lines."""
        return [item.id for item in self.hvdc if item.built]

    def commitments(self, scenario: str, period: int) -> Dict[str, bool]:
        """Commitment of every thermal unit in one period."""
        return {
            entry.unit: entry.committed
            for entry in self.dispatch
            if entry.scenario == scenario and entry.period == period
        }


def _round_binary(value: float) -> bool:
    return value > 0.5


def _emergency_outcomes(
    problem: PlanningProblem, solution: Solution, built: Dict[str, bool]
) -> List[EmergencyOutcome]:
    system = problem.system
    probability = problem.options.fault_probability
    if probability is None:
        probability = system.emergencies.probability
    outcomes = []
    if problem.emergencies:
        items = [
            (handles.scenario, handles.period, handles.faulted_line, handles)
            for handles in problem.emergencies
        ]
    else:
        stride = problem.options.period_stride or system.emergencies.period_stride
        items = [
            (scenario.id, period, line, None)
            for scenario in system.scenarios
            for period in range(0, scenario.periods, stride)
            for line in emergency_lines(system)
        ]
    for scenario_id, period, line, handles in items:
        flow = solution.value(problem.dc_flows[(scenario_id, period, line)])
        if not built.get(line, True):
            if abs(flow) > NULL_FLOW:
                LOGGER.warning(
                    "Unbuilt line %s carries %.3g MW in %s/%d", line, flow, scenario_id, period
                )
            continue
        origin, terminus = system.hvdc_endpoints(line)
        imbalances = {area: 0.0 for area in system.area_ids}
        imbalances[origin] = flow
        imbalances[terminus] = -flow
        emergency = EmergencyScenario(
            faulted_line=line, imbalances=imbalances, probability=probability
        )
        if handles is None:
            schedule = EfcSchedule(
                faulted_line=line,
                epc={},
                dlc={area: 0.0 for area in system.area_ids},
                area_epc={area: 0.0 for area in system.area_ids},
                cost=0.0,
            )
            regions = {}
        else:
            schedule = EfcSchedule(
                faulted_line=line,
                epc={other: solution.value(var) for other, var in handles.epc.items()},
                dlc={area: solution.value(var) for area, var in handles.dlc.items()},
                area_epc={
                    area: solution.evaluate(expr)
                    for area, expr in handles.area_epc.items()
                },
                cost=solution.evaluate(handles.cost),
            )
            regions = {
                area: embedding.active(solution.values)
                for area, embedding in handles.embeddings.items()
            }
        outcomes.append(
            EmergencyOutcome(
                scenario=scenario_id,
                period=period,
                emergency=emergency,
                schedule=schedule,
                regions=regions,
            )
        )
    return outcomes


def extract_plan(problem: PlanningProblem, solution: Solution) -> PlanResult:
    """Plan from a solved model; infeasibility names the binding mode."""
    mode = problem.options.mode
    if solution.status is SolveStatus.INFEASIBLE:
        raise InfeasibleError(
            "Planning in mode {} is infeasible: {}".format(mode.value, INFEASIBLE_HINTS[mode]),
            mode=mode.value,
        )
    if not solution.incumbent:
        raise SolverExitError(
            "Solver returned {} without an incumbent plan".format(solution.status.value)
        )
    system = problem.system
    hvdc = []
    for cand in system.hvdc_candidates:
        handles = problem.hvdc[cand.id]
        hvdc.append(
            HvdcInstallation(
                id=cand.id,
                built=_round_binary(solution.value(handles.built)),
                increments=int(round(solution.value(handles.increments))),
                capacity=max(0.0, solution.value(handles.capacity)),
            )
        )
    built = {item.id: item.built for item in hvdc}
    ess = {
        unit_id: _round_binary(solution.value(var)) for unit_id, var in problem.ess.items()
    }
    dispatch = []
    for key, var in problem.outputs.items():
        scenario_id, period, unit = key
        on = problem.commitments.get(key)
        dispatch.append(
            DispatchEntry(
                scenario=scenario_id,
                period=period,
                unit=unit,
                committed=True if on is None else _round_binary(solution.value(on)),
                output=solution.value(var),
            )
        )
    flows = [
        FlowEntry(scenario=key[0], period=key[1], line=key[2], flow=solution.value(var))
        for key, var in problem.dc_flows.items()
    ]
    shed: Dict[str, float] = {scenario.id: 0.0 for scenario in system.scenarios}
    for (scenario_id, _, _), var in problem.shed.items():
        shed[scenario_id] += solution.value(var) * system.period_hours
    parts = {name: solution.evaluate(expr) for name, expr in problem.costs.items()}
    costs = CostBreakdown(total=sum(parts.values()), **parts)
    result = PlanResult(
        mode=mode,
        status=solution.status,
        objective=solution.objective,
        costs=costs,
        hvdc=hvdc,
        ess=ess,
        dispatch=dispatch,
        flows=flows,
        shed=shed,
        emergencies=_emergency_outcomes(problem, solution, built),
        solver=solution.solver,
    )
    LOGGER.info(
        "Plan %s: total %.2f (investment %.2f, operational %.2f, emergency %.4f), built %s",
        mode.value,
        costs.total,
        costs.investment,
        costs.operational,
        costs.emergency,
        ", ".join(result.installed_lines()) or "nothing",
    )
    return result


async def solve_plan_async(
    problem: PlanningProblem, config: Optional[SolverConfig] = None
) -> PlanResult:
    """Solve a planning model."""
    solution = await solve_async(problem.model, config)
    return extract_plan(problem, solution)


def solve_plan(problem: PlanningProblem, config: Optional[SolverConfig] = None) -> PlanResult:
    """Blocking wrapper of solve_plan_async.

    Runs its own event loop; inside a running loop await solve_plan_async.
    """
    return run_blocking(solve_plan_async(problem, config), "solve_plan_async")
