"""Tri-layer planning MILP: investment, scenario operation and emergencies."""

import logging
import math
from enum import Enum
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from pydantic import Field
import pyomo.environ as pyo
from typing_extensions import Annotated

from ..aggregation import commitment_coefficients
from ..base import FrozenRecord
from ..base.error import DataError, NoSecureControlError
from ..efc import EfcCosts
from ..milp import (
    Expression,
    MilpModel,
    RegionEmbedding,
    Var,
    VarKind,
    add_abs_linearization,
    embed_secure_regions,
)
from ..valid import Fraction
from ..wodt import SecureRegion
from .system import PlanningSystem, Scenario

LOGGER = logging.getLogger(__name__)

DEFAULT_VALUE_OF_LOST_LOAD = 10000.0


class PlanningMode(str, Enum):
    """How frequency security enters the plan."""

    NONFC = "nonfc"
    FC = "fc"
    FCEC = "fcec"


class PlanningOptions(FrozenRecord):
    """Economic and emergency parameters of a planning run."""

    mode: PlanningMode = PlanningMode.FCEC
    discount_rate: Annotated[float, Field(description="r", ge=0)] = 0.05
    lifespan: Annotated[int, Field(description="N in years", ge=1)] = 30
    fault_probability: Annotated[
        Optional[float], Field(description="pi_e; system setting when unset", ge=0, le=1)
    ] = None
    costs: EfcCosts = EfcCosts()
    dlc_fraction: Annotated[Fraction, Field(description="DLC share of area load")] = 0.02
    value_of_lost_load: Annotated[float, Field(description="$/MWh", ge=0)] = (
        DEFAULT_VALUE_OF_LOST_LOAD
    )
    period_stride: Annotated[
        Optional[int], Field(description="Consider emergencies every k-th period", ge=1)
    ] = None


class CandidateHandles(NamedTuple):
    """Investment variables of a candidate HVDC line."""

    built: Var
    increments: Var
    capacity: Var


class StorageHandles(NamedTuple):
    """Operation variables of a storage unit in one period."""

    charge: Var
    discharge: Var
    energy: Var


class EmergencyHandles(NamedTuple):
    """Variables of one (scenario, period, faulted line) emergency."""

    scenario: str
    period: int
    faulted_line: str
    flow: Var
    imbalances: Dict[str, Expression]
    epc: Dict[str, Var]
    dlc: Dict[str, Var]
    area_epc: Dict[str, Expression]
    embeddings: Dict[str, RegionEmbedding]
    cost: Expression


class PlanningProblem(NamedTuple):
    """Planning model with handles to every decision of interest."""

    model: MilpModel
    system: PlanningSystem
    options: PlanningOptions
    hvdc: Dict[str, CandidateHandles]
    ess: Dict[str, Var]
    commitments: Dict[Tuple[str, int, str], Var]
    outputs: Dict[Tuple[str, int, str], Var]
    dc_flows: Dict[Tuple[str, int, str], Var]
    shed: Dict[Tuple[str, int, str], Var]
    storage: Dict[Tuple[str, int, str], StorageHandles]
    emergencies: List[EmergencyHandles]
    costs: Dict[str, Expression]


def annuity_factor(rate: float, lifespan: int) -> float:
    """Capital recovery factor r / (1 - (1 + r)^-N)."""
    if lifespan < 1:
        raise DataError("Lifespan must be at least one year")
    if rate == 0:
        return 1.0 / lifespan
    return rate / (1.0 - (1.0 + rate) ** -lifespan)


def _add_investment(
    model: MilpModel, system: PlanningSystem, factor: float, cost: List[Expression]
):
    hvdc = {}
    for cand in system.hvdc_candidates:
        built = model.add_var("z_{}".format(cand.id), VarKind.BINARY)
        increments = model.add_var(
            "n_{}".format(cand.id), VarKind.INTEGER, 0, cand.max_increments
        )
        capacity = model.add_var("pcap_{}".format(cand.id), upper=cand.p_cap_max)
        model.add_constraint(
            capacity - cand.p_cap_min * built - cand.cap_increment * increments,
            "=",
            0.0,
            name="size_{}".format(cand.id),
        )
        model.add_constraint(
            capacity - cand.p_cap_max * built, "<=", 0.0, name="size_max_{}".format(cand.id)
        )
        cost.append(factor * cand.fixed_cost * built)
        cost.append(factor * cand.capacity_cost * capacity)
        hvdc[cand.id] = CandidateHandles(built, increments, capacity)
    ess = {}
    for unit in system.ess_candidates:
        built = model.add_var("zess_{}".format(unit.id), VarKind.BINARY)
        cost.append(factor * unit.investment_cost * built)
        ess[unit.id] = built
    return hvdc, ess


def _add_thermal(
    model: MilpModel,
    system: PlanningSystem,
    scenario: Scenario,
    cost: List[Expression],
    commitments: dict,
    outputs: dict,
):
    hours = system.period_hours
    weight = scenario.weight
    for unit in system.thermal:
        startups: List[Optional[Var]] = []
        shutdowns: List[Optional[Var]] = []
        for t in range(scenario.periods):
            key = (scenario.id, t, unit.id)
            tag = "{}_{}_{}".format(scenario.id, t, unit.id)
            on = model.add_var("u_" + tag, VarKind.BINARY)
            out = model.add_var("p_" + tag, upper=unit.p_max)
            commitments[key], outputs[key] = on, out
            blocks: Expression = 0.0
            for number, segment in enumerate(unit.segments):
                block = model.add_var("seg{}_{}".format(number, tag), upper=segment.size)
                model.add_constraint(
                    block - segment.size * on, "<=", 0.0, name="seg{}_on_{}".format(number, tag)
                )
                blocks += block
                cost.append(weight * hours * segment.marginal_cost * block)
            model.add_constraint(out - unit.p_min * on - blocks, "=", 0.0, name="out_" + tag)
            cost.append(weight * hours * unit.no_load_cost * on)
            if t == 0:
                startups.append(None)
                shutdowns.append(None)
                continue
            previous_on = commitments[(scenario.id, t - 1, unit.id)]
            previous_out = outputs[(scenario.id, t - 1, unit.id)]
            start = model.add_var("v_" + tag, VarKind.BINARY)
            stop = model.add_var("w_" + tag, VarKind.BINARY)
            startups.append(start)
            shutdowns.append(stop)
            model.add_constraint(
                on - previous_on - start + stop, "=", 0.0, name="transition_" + tag
            )
            cost.append(weight * unit.startup_cost * start)
            cost.append(weight * unit.shutdown_cost * stop)
            model.add_constraint(
                out - previous_out - unit.ramp_up * previous_on
                - max(unit.p_min, unit.ramp_up) * start,
                "<=",
                0.0,
                name="ramp_up_" + tag,
            )
            model.add_constraint(
                previous_out - out - unit.ramp_down * on
                - max(unit.p_min, unit.ramp_down) * stop,
                "<=",
                0.0,
                name="ramp_down_" + tag,
            )
            # trailing windows truncated at the first period
            if unit.min_on > 1:
                window = [var for var in startups[max(1, t - unit.min_on + 1):t + 1] if var is not None]
                model.add_constraint(
                    pyo.quicksum(window) - on, "<=", 0.0, name="min_on_" + tag
                )
            if unit.min_off > 1:
                window = [var for var in shutdowns[max(1, t - unit.min_off + 1):t + 1] if var is not None]
                model.add_constraint(
                    pyo.quicksum(window) + on, "<=", 1.0, name="min_off_" + tag
                )


def _add_storage(
    model: MilpModel,
    system: PlanningSystem,
    scenario: Scenario,
    ess: Mapping[str, Var],
    storage: dict,
):
    hours = system.period_hours
    for unit in system.ess_candidates:
        initial = unit.e_min + unit.initial_soc * (unit.e_max - unit.e_min)
        energy_before: Expression = initial
        for t in range(scenario.periods):
            tag = "{}_{}_{}".format(scenario.id, t, unit.id)
            charge = model.add_var("pc_" + tag, upper=unit.p_charge_max)
            discharge = model.add_var("pd_" + tag, upper=unit.p_discharge_max)
            charging = model.add_var("xc_" + tag, VarKind.BINARY)
            discharging = model.add_var("xd_" + tag, VarKind.BINARY)
            energy = model.add_var("e_" + tag, lower=unit.e_min, upper=unit.e_max)
            model.add_constraint(
                charge - unit.p_charge_max * charging, "<=", 0.0, name="pc_on_" + tag
            )
            model.add_constraint(
                discharge - unit.p_discharge_max * discharging, "<=", 0.0, name="pd_on_" + tag
            )
            model.add_constraint(charging + discharging, "<=", 1.0, name="mode_" + tag)
            model.add_constraint(charging - ess[unit.id], "<=", 0.0, name="xc_built_" + tag)
            model.add_constraint(discharging - ess[unit.id], "<=", 0.0, name="xd_built_" + tag)
            model.add_constraint(
                energy - energy_before - unit.eta_charge * hours * charge
                + (hours / unit.eta_discharge) * discharge,
                "=",
                0.0,
                name="soc_" + tag,
            )
            storage[(scenario.id, t, unit.id)] = StorageHandles(charge, discharge, energy)
            energy_before = energy
        if scenario.periods:
            model.add_constraint(
                energy_before,
                ">=",
                initial,
                name="soc_end_{}_{}".format(scenario.id, unit.id),
            )


def _add_network(
    model: MilpModel,
    system: PlanningSystem,
    scenario: Scenario,
    hvdc: Mapping[str, CandidateHandles],
    options: PlanningOptions,
    cost: List[Expression],
    outputs: dict,
    storage: dict,
    dc_flows: dict,
    shed: dict,
):
    hours = system.period_hours
    weight = scenario.weight
    references = {}
    for bus in system.buses:
        references.setdefault(bus.area, bus.id)
    for t in range(scenario.periods):
        injection: Dict[str, Expression] = {bus.id: 0.0 for bus in system.buses}
        theta = {}
        for bus in system.buses:
            tag = "{}_{}_{}".format(scenario.id, t, bus.id)
            if references[bus.area] == bus.id:
                theta[bus.id] = model.add_var("theta_" + tag, lower=0.0, upper=0.0)
            else:
                theta[bus.id] = model.add_var("theta_" + tag, lower=-math.pi, upper=math.pi)
        for unit in system.thermal:
            injection[unit.bus] += outputs[(scenario.id, t, unit.id)]
        for unit in system.hydro:
            tag = "{}_{}_{}".format(scenario.id, t, unit.id)
            out = model.add_var("ph_" + tag, upper=unit.p_max)
            outputs[(scenario.id, t, unit.id)] = out
            injection[unit.bus] += out
            cost.append(weight * hours * unit.marginal_cost * out)
        for unit in system.renewable:
            available = scenario.renewables.get(unit.id)
            if not available or available[t] <= 0:
                continue
            tag = "{}_{}_{}".format(scenario.id, t, unit.id)
            out = model.add_var("pr_" + tag, upper=available[t])
            outputs[(scenario.id, t, unit.id)] = out
            injection[unit.bus] += out
        for unit in system.ess_candidates:
            handles = storage[(scenario.id, t, unit.id)]
            injection[unit.bus] += handles.discharge
            injection[unit.bus] -= handles.charge
        for line in system.ac_lines:
            tag = "{}_{}_{}".format(scenario.id, t, line.id)
            flow = (theta[line.from_bus] - theta[line.to_bus]) * line.susceptance
            model.add_constraint(flow, "<=", line.capacity, name="ac_max_" + tag)
            model.add_constraint(flow, ">=", -line.capacity, name="ac_min_" + tag)
            injection[line.from_bus] -= flow
            injection[line.to_bus] += flow
        for line in system.dc_lines:
            tag = "{}_{}_{}".format(scenario.id, t, line.id)
            flow = model.add_var("pdc_" + tag, lower=-line.capacity, upper=line.capacity)
            dc_flows[(scenario.id, t, line.id)] = flow
            injection[line.from_bus] -= flow
            injection[line.to_bus] += flow
        for cand in system.hvdc_candidates:
            tag = "{}_{}_{}".format(scenario.id, t, cand.id)
            flow = model.add_var("pdc_" + tag, lower=-cand.p_cap_max, upper=cand.p_cap_max)
            capacity = hvdc[cand.id].capacity
            model.add_constraint(flow - capacity, "<=", 0.0, name="dc_cap_max_" + tag)
            model.add_constraint(flow + capacity, ">=", 0.0, name="dc_cap_min_" + tag)
            dc_flows[(scenario.id, t, cand.id)] = flow
            injection[cand.from_bus] -= flow
            injection[cand.to_bus] += flow
        for bus in system.buses:
            tag = "{}_{}_{}".format(scenario.id, t, bus.id)
            load = scenario.loads.get(bus.id, [0.0] * scenario.periods)[t]
            if load > 0:
                cut = model.add_var("shed_" + tag, upper=load)
                shed[(scenario.id, t, bus.id)] = cut
                injection[bus.id] += cut
                cost.append(weight * hours * options.value_of_lost_load * cut)
            model.add_constraint(injection[bus.id], "=", load, name="balance_" + tag)


def _line_limits(system: PlanningSystem, hvdc: Mapping[str, CandidateHandles]):
    """Rating of every HVDC line: a constant or the capacity variable."""
    limits: Dict[str, Tuple[float, Expression]] = {}
    for line in system.dc_lines:
        limits[line.id] = (line.capacity, line.capacity)
    for cand in system.hvdc_candidates:
        limits[cand.id] = (cand.p_cap_max, hvdc[cand.id].capacity)
    return limits


def _area_features(
    system: PlanningSystem,
    scenario: Scenario,
    period: int,
    commitments: Mapping,
    ess: Mapping[str, Var],
) -> Dict[str, Tuple[Expression, Expression, Expression]]:
    """H_a, D_fast,a and D_slow,a as affine functions of u and z."""
    areas = system.bus_area
    features = {}
    for area in system.areas:
        load = system.area_load(scenario, area.id, period)
        inertia: Expression = area.fixed_inertia
        fast: Expression = area.damping_per_load * load
        slow: Expression = 0.0
        units = [unit for unit in system.thermal if areas[unit.bus] == area.id]
        coefficients = commitment_coefficients([unit.dynamics() for unit in units])
        for unit, (h, d_fast, d_slow) in zip(units, coefficients):
            on = commitments[(scenario.id, period, unit.id)]
            inertia += float(h) * on
            fast += float(d_fast) * on
            slow += float(d_slow) * on
        for unit in system.hydro:
            if areas[unit.bus] == area.id:
                inertia += unit.inertia_const * unit.p_max
                fast += unit.p_max / unit.perm_droop
        for unit in system.ess_candidates:
            if areas[unit.bus] == area.id:
                dynamics = unit.dynamics()
                fast += dynamics.p_max / dynamics.droop * ess[unit.id]
        features[area.id] = (inertia, fast, slow)
    return features


def _add_emergency(
    model: MilpModel,
    system: PlanningSystem,
    scenario: Scenario,
    period: int,
    faulted: str,
    options: PlanningOptions,
    rules: Mapping[str, Sequence[SecureRegion]],
    limits: Mapping[str, Tuple[float, Expression]],
    dc_flows: Mapping,
    params: Mapping[str, Tuple[Expression, Expression, Expression]],
    probability: float,
) -> EmergencyHandles:
    tag = "{}_{}_{}".format(scenario.id, period, faulted)
    flow = dc_flows[(scenario.id, period, faulted)]
    origin, terminus = system.hvdc_endpoints(faulted)
    imbalances: Dict[str, Expression] = {area: 0.0 for area in system.area_ids}
    imbalances[origin] += flow
    imbalances[terminus] -= flow
    weight = scenario.weight * probability
    cost: List[Expression] = []
    epc: Dict[str, Var] = {}
    dlc: Dict[str, Var] = {}
    area_epc: Dict[str, Expression] = {area: 0.0 for area in system.area_ids}
    controlled = options.mode is PlanningMode.FCEC
    if controlled:
        for line, (rating, limit) in limits.items():
            if line == faulted:
                continue
            var = model.add_var(
                "epc_{}_{}".format(tag, line), lower=-2.0 * rating, upper=2.0 * rating
            )
            epc[line] = var
            plus, minus = add_abs_linearization(model, var, "epc_{}_{}".format(tag, line))
            cost.append(weight * options.costs.epc * plus)
            cost.append(weight * options.costs.epc * minus)
            post = dc_flows[(scenario.id, period, line)] + var
            model.add_constraint(
                post - limit, "<=", 0.0, name="dcpf_max_{}_{}".format(tag, line)
            )
            model.add_constraint(
                post + limit, ">=", 0.0, name="dcpf_min_{}_{}".format(tag, line)
            )
            line_from, line_to = system.hvdc_endpoints(line)
            area_epc[line_from] -= var
            area_epc[line_to] += var
        for area in system.area_ids:
            shed_max = options.dlc_fraction * system.area_load(scenario, area, period)
            var = model.add_var("dlc_{}_{}".format(tag, area), upper=max(0.0, shed_max))
            dlc[area] = var
            cost.append(weight * options.costs.dlc * var)
    embeddings = {}
    for area in system.area_ids:
        inertia, fast, slow = params[area]
        features = [
            inertia,
            fast,
            slow,
            area_epc[area],
            dlc.get(area, 0.0),
            imbalances[area],
        ]
        embeddings[area] = embed_secure_regions(
            model, features, rules[area], prefix="freq_{}_{}".format(tag, area)
        )
    return EmergencyHandles(
        scenario.id,
        period,
        faulted,
        flow,
        imbalances,
        epc,
        dlc,
        area_epc,
        embeddings,
        pyo.quicksum(cost),
    )


def emergency_lines(system: PlanningSystem) -> List[str]:
    """HVDC lines whose faults are considered."""
    lines = [line.id for line in system.dc_lines] + [
        cand.id for cand in system.hvdc_candidates
    ]
    selected = system.emergencies.lines
    if selected is None:
        return lines
    return [line for line in lines if line in selected]


def build_planning_model(
    system: PlanningSystem,
    options: Optional[PlanningOptions] = None,
    rules: Optional[Mapping[str, Sequence[SecureRegion]]] = None,
) -> PlanningProblem:
    """Assemble the planning MILP for one mode.

    The objective is the annualized investment cost plus the weighted
    operating cost of every scenario plus, in the frequency-constrained
    modes, the probability-weighted emergency control cost.
    """
    options = options or PlanningOptions()
    rules = dict(rules or {})
    mode = options.mode
    if mode is not PlanningMode.NONFC:
        missing = [area for area in system.area_ids if area not in rules]
        if missing:
            raise DataError(
                "Mode {} needs frequency rules for areas {}".format(mode.value, missing)
            )
        for area in system.area_ids:
            if not rules[area]:
                raise NoSecureControlError("Area {} has no secure region".format(area))
    probability = options.fault_probability
    if probability is None:
        probability = system.emergencies.probability
    stride = options.period_stride or system.emergencies.period_stride

    model = MilpModel("plan_{}".format(mode.value))
    terms: Dict[str, List[Expression]] = {
        "investment": [],
        "operational": [],
        "emergency": [],
    }
    factor = annuity_factor(options.discount_rate, options.lifespan)
    hvdc, ess = _add_investment(model, system, factor, terms["investment"])

    commitments: Dict = {}
    outputs: Dict = {}
    dc_flows: Dict = {}
    shed: Dict = {}
    storage: Dict = {}
    emergencies: List[EmergencyHandles] = []
    limits = _line_limits(system, hvdc)
    faults = emergency_lines(system)
    for scenario in system.scenarios:
        _add_thermal(model, system, scenario, terms["operational"], commitments, outputs)
        _add_storage(model, system, scenario, ess, storage)
        _add_network(
            model,
            system,
            scenario,
            hvdc,
            options,
            terms["operational"],
            outputs,
            storage,
            dc_flows,
            shed,
        )
        if mode is PlanningMode.NONFC:
            continue
        for period in range(0, scenario.periods, stride):
            params = _area_features(system, scenario, period, commitments, ess)
            for line in faults:
                handles = _add_emergency(
                    model,
                    system,
                    scenario,
                    period,
                    line,
                    options,
                    rules,
                    limits,
                    dc_flows,
                    params,
                    probability,
                )
                terms["emergency"].append(handles.cost)
                emergencies.append(handles)

    costs = {part: pyo.quicksum(items) for part, items in terms.items()}
    model.set_objective(pyo.quicksum(costs.values()))
    LOGGER.info(
        "Built %r with %d emergencies (annuity factor %.6f)",
        model,
        len(emergencies),
        factor,
    )
    return PlanningProblem(
        model,
        system,
        options,
        hvdc,
        ess,
        commitments,
        outputs,
        dc_flows,
        shed,
        storage,
        emergencies,
        costs,
    )

