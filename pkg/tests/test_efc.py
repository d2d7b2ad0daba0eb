"""Test coordinated emergency frequency control and region embedding."""

import math

import numpy as np
import pandas as pd
import pytest
from scipy.optimize import linprog

from gridnadir.aggregation import EquivalentParams
from gridnadir.base.error import (
    DataError,
    ModelError,
    NoSecureControlError,
    SolverExitError,
)
from gridnadir.efc import (
    AreaResources,
    EfcCosts,
    EfcSchedule,
    EmergencyScenario,
    HvdcLine,
    build_efc_problem,
    extract_schedule,
    solve_efc,
    solve_emergencies,
    verify_schedule,
    write_schedules,
)
from gridnadir.milp import (
    MilpModel,
    Solution,
    SolverConfig,
    SolveStatus,
    add_abs_linearization,
    embed_secure_regions,
    solve,
)
from gridnadir.wodt import SecureRegion

AREAS = ["A", "B", "C"]


def test_line_headroom_and_indicator(efc_lines):
    line = efc_lines[0]
    assert line.headroom == 200.0
    assert line.copy(update={"epc_max": 50.0}).headroom == 50.0
    assert (line.indicator("A"), line.indicator("B"), line.indicator("C")) == (-1, 1, 0)


def test_prefault_flow_must_fit_the_rating():
    with pytest.raises(ValueError):
        HvdcLine(id="L", from_area="A", to_area="B", capacity=100.0, prefault_flow=-150.0)


def test_fault_scenario_is_balanced(efc_lines):
    scenario = EmergencyScenario.from_fault(efc_lines[0], areas=AREAS)
    assert scenario.imbalances == {"A": 100.0, "B": -100.0, "C": 0.0}
    assert scenario.imbalance("D") == 0.0
    with pytest.raises(ValueError):
        EmergencyScenario(faulted_line="L1", imbalances={"A": 10.0, "B": -5.0})


def test_cheapest_schedule_uses_the_parallel_line(
    efc_areas, efc_lines, band_rules, solver_config
):
    scenario = EmergencyScenario.from_fault(efc_lines[0], areas=AREAS)
    problem = build_efc_problem(efc_areas, efc_lines, scenario, band_rules)
    assert "L1" not in problem.epc
    schedule = solve_efc(problem, solver_config)
    assert schedule.epc["L2"] == pytest.approx(50.0, rel=1e-3)
    assert schedule.epc["L3"] == pytest.approx(0.0, abs=1e-3)
    assert sum(schedule.dlc.values()) == pytest.approx(0.0, abs=1e-3)
    assert schedule.area_epc["A"] == pytest.approx(-50.0, rel=1e-3)
    assert schedule.area_epc["B"] == pytest.approx(50.0, rel=1e-3)
    assert schedule.cost == pytest.approx(5000.0, rel=1e-3)


def test_areas_need_rules(efc_areas, efc_lines, band_rules):
    scenario = EmergencyScenario.from_fault(efc_lines[0], areas=AREAS)
    with pytest.raises(DataError):
        build_efc_problem(efc_areas, efc_lines, scenario, {"A": band_rules["A"]})
    with pytest.raises(NoSecureControlError) as info:
        build_efc_problem(efc_areas, efc_lines, scenario, {**band_rules, "C": []})
    assert info.value.emergency == scenario


def test_faulted_line_must_exist(efc_areas, efc_lines, band_rules):
    scenario = EmergencyScenario(faulted_line="L9", imbalances={})
    with pytest.raises(DataError):
        build_efc_problem(efc_areas, efc_lines, scenario, band_rules)


def test_infeasible_emergency_is_a_domain_error(efc_areas, efc_lines, band_rules):
    scenario = EmergencyScenario.from_fault(efc_lines[0], areas=AREAS)
    problem = build_efc_problem(efc_areas, efc_lines, scenario, band_rules)
    with pytest.raises(NoSecureControlError):
        extract_schedule(problem, Solution(status=SolveStatus.INFEASIBLE))


def test_time_limit_without_incumbent_has_no_schedule(efc_areas, efc_lines, band_rules):
    scenario = EmergencyScenario.from_fault(efc_lines[0], areas=AREAS)
    problem = build_efc_problem(efc_areas, efc_lines, scenario, band_rules)
    solution = solve(problem.model, SolverConfig(time_limit=0.0))
    assert solution.status is SolveStatus.LIMIT and solution.has_values
    with pytest.raises(SolverExitError, match="without an incumbent schedule"):
        extract_schedule(problem, solution)


@pytest.mark.asyncio
async def test_emergencies_keep_their_order(
    efc_areas, efc_lines, band_rules, solver_config
):
    scenarios = [
        EmergencyScenario.from_fault(efc_lines[2], areas=AREAS),
        EmergencyScenario.from_fault(efc_lines[0], areas=AREAS),
    ]
    results = await solve_emergencies(
        efc_areas, efc_lines, scenarios, band_rules, config=solver_config, jobs=2
    )
    assert [result.faulted_line for result in results] == ["L3", "L1"]
    assert results[0].cost == pytest.approx(0.0, abs=1e-3)
    assert results[1].cost == pytest.approx(5000.0, rel=1e-3)


def test_verify_schedule(efc_lines, storage_model):
    scenario = EmergencyScenario.from_fault(efc_lines[0], areas=AREAS[:2])
    models = {"A": storage_model, "B": storage_model}
    compensated = EfcSchedule(
        faulted_line="L1",
        epc={"L2": 100.0},
        dlc={},
        area_epc={"A": -100.0, "B": 100.0},
        cost=0.0,
    )
    report = verify_schedule(
        compensated, models, scenario, epc_delay=0.0, dlc_delay=0.0, dt=0.01, horizon=5.0
    )
    assert report.secure
    assert report.nadirs["A"] == pytest.approx(0.0, abs=1e-12)

    idle = compensated.copy(update={"epc": {}, "area_epc": {}})
    report = verify_schedule(idle, models, scenario, dt=0.01, horizon=5.0)
    assert report.violations == ["A", "B"]
    assert not report.secure


def test_write_schedules(tmp_path):
    schedule = EfcSchedule(
        faulted_line="L1",
        epc={"L2": 50.0},
        dlc={"A": 0.0, "B": 2.5},
        area_epc={"A": -50.0, "B": 50.0},
        cost=7500.0,
    )
    table = pd.read_csv(write_schedules([schedule], tmp_path / "efc.csv"))
    assert list(table.columns) == ["faulted_line", "kind", "resource", "power_mw"]
    assert list(table["kind"]) == ["epc", "dlc", "dlc"]
    assert table["power_mw"].sum() == pytest.approx(52.5)

    empty = pd.read_csv(write_schedules([], tmp_path / "none.csv"))
    assert empty.empty


def test_single_region_selector_is_fixed():
    model = MilpModel()
    x = model.add_var("x", lower=-10.0, upper=10.0)
    region = SecureRegion(leaf_id=0, coeffs=[[1.0]], bias=[0.0])
    embedding = embed_secure_regions(model, [x], [region], prefix="r")
    assert embedding.selectors[0].fixed
    assert embedding.selectors[0].value == 1.0
    model.set_objective(x)
    solution = solve(model)
    assert solution.value(x) == pytest.approx(0.0, abs=1e-3)
    assert solution.value(x) >= 0.0


def test_violated_constant_row_disables_its_region():
    model = MilpModel()
    x = model.add_var("x", lower=-10.0, upper=10.0)
    regions = [
        SecureRegion(leaf_id=1, coeffs=[[0.0, 1.0]], bias=[-10.0]),
        SecureRegion(leaf_id=2, coeffs=[[1.0, 0.0]], bias=[-2.0]),
    ]
    embedding = embed_secure_regions(model, [x, 5.0], regions, prefix="r")
    assert embedding.selectors[0].fixed
    assert embedding.selectors[0].value == 0.0
    model.set_objective(x)
    solution = solve(model)
    assert solution.value(x) == pytest.approx(2.0, abs=1e-3)
    assert embedding.active(solution.values) == 1


def test_embedding_rejects_bad_input():
    model = MilpModel()
    x = model.add_var("x", lower=-math.inf, upper=1.0)
    region = SecureRegion(leaf_id=0, coeffs=[[1.0]], bias=[0.0])
    with pytest.raises(ModelError):
        embed_secure_regions(model, [x], [region])
    with pytest.raises(ModelError):
        embed_secure_regions(model, [x], [], bounds=[(-1.0, 1.0)])


def test_abs_linearization():
    model = MilpModel()
    x = model.add_var("x", lower=-3.0, upper=7.0)
    plus, minus = add_abs_linearization(model, x, "x")
    assert (plus.ub, minus.ub) == (7.0, 3.0)
    model.fix(x, -2.0)
    model.set_objective(plus + minus)
    assert solve(model).objective == pytest.approx(2.0)


def test_schedule_matches_exhaustive_search(solver_config, make_region):
    """Grid search over a two-area case where DLC is cheaper than EPC."""
    params = EquivalentParams(inertia=2500.0, d_fast=3500.0, d_slow=7000.0)
    areas = [AreaResources(id=area, params=params, dlc_max=20.0) for area in "AB"]
    lines = [
        HvdcLine(id="L1", from_area="A", to_area="B", capacity=200.0, prefault_flow=80.0),
        HvdcLine(id="L2", from_area="A", to_area="B", capacity=200.0),
    ]
    rules = {"A": [make_region(50.0)], "B": [make_region(20.0)]}
    costs = EfcCosts(epc=100.0, dlc=50.0)
    scenario = EmergencyScenario.from_fault(lines[0], areas=["A", "B"])
    schedule = solve_efc(
        build_efc_problem(areas, lines, scenario, rules, costs), solver_config
    )

    epc, dlc_a, dlc_b = np.meshgrid(
        np.arange(-200.0, 201.0), np.arange(0.0, 21.0), np.arange(0.0, 21.0), indexing="ij"
    )
    epc, dlc_a, dlc_b = epc.ravel(), dlc_a.ravel(), dlc_b.ravel()
    secure = np.ones(len(epc), dtype=bool)
    for area, injection, dlc in (("A", -epc, dlc_a), ("B", epc, dlc_b)):
        features = np.column_stack(
            [
                np.full(len(epc), params.inertia),
                np.full(len(epc), params.d_fast),
                np.full(len(epc), params.d_slow),
                injection,
                dlc,
                np.full(len(epc), scenario.imbalance(area)),
            ]
        )
        coeffs, bias = rules[area][0].matrix()
        secure &= np.all(features @ coeffs.T + bias >= 0.0, axis=1)
    cost = costs.epc * np.abs(epc) + costs.dlc * (dlc_a + dlc_b)
    best = cost[secure].min()
    assert best == pytest.approx(5000.0)
    assert schedule.cost == pytest.approx(best, rel=5e-3)
    assert schedule.epc["L2"] == pytest.approx(40.0, rel=5e-3)
    assert schedule.dlc["B"] == pytest.approx(20.0, rel=5e-3)


def test_embedding_picks_a_region_that_holds_the_optimum():
    """Random boxes of overlapping polytopes against per-region linear programs."""
    rng = np.random.default_rng(11)
    for _ in range(50):
        regions = []
        for leaf in range(int(rng.integers(2, 4))):
            center = rng.uniform(-6.0, 6.0, size=2)
            normals = rng.normal(size=(int(rng.integers(2, 4)), 2))
            slack = rng.uniform(0.5, 3.0, size=len(normals))
            regions.append(
                SecureRegion(
                    leaf_id=leaf,
                    coeffs=normals.tolist(),
                    bias=(slack - normals @ center).tolist(),
                )
            )
        direction = rng.normal(size=2)

        model = MilpModel()
        x = model.add_var("x", lower=-10.0, upper=10.0)
        y = model.add_var("y", lower=-10.0, upper=10.0)
        embedding = embed_secure_regions(model, [x, y], regions, prefix="r")
        model.set_objective(float(direction[0]) * x + float(direction[1]) * y)
        solution = solve(model)
        assert solution.status == SolveStatus.OPTIMAL

        point = [solution.value(x), solution.value(y)]
        picks = [solution.value(selector) for selector in embedding.selectors]
        assert sum(picks) == pytest.approx(1.0, abs=1e-6)
        chosen = regions[embedding.active(solution.values)]
        assert chosen.contains(point, tol=1e-6)

        best = math.inf
        for region in regions:
            coeffs, bias = region.matrix(2)
            result = linprog(
                direction, A_ub=-coeffs, b_ub=bias, bounds=[(-10.0, 10.0)] * 2
            )
            if result.status == 0:
                best = min(best, result.fun)
        assert solution.objective == pytest.approx(best, abs=5e-2)


def test_unreachable_regions_rule_out_the_emergency():
    model = MilpModel()
    x = model.add_var("x", lower=-10.0, upper=10.0)
    region = SecureRegion(leaf_id=0, coeffs=[[0.0, 1.0]], bias=[-10.0])
    with pytest.raises(NoSecureControlError):
        embed_secure_regions(model, [x, 5.0], [region], prefix="r")


@pytest.mark.asyncio
async def test_unreachable_area_fails_only_its_emergency(
    efc_areas, efc_lines, band_rules, solver_config
):
    # inertia is a constant feature here, so no control can reach this region
    heavy = SecureRegion(leaf_id=0, coeffs=[[1.0, 0, 0, 0, 0, 0]], bias=[-1e6])
    rules = {**band_rules, "C": [heavy]}
    scenarios = [
        EmergencyScenario.from_fault(efc_lines[0], areas=AREAS),
        EmergencyScenario.from_fault(efc_lines[2], areas=AREAS),
    ]
    with pytest.raises(NoSecureControlError) as info:
        build_efc_problem(efc_areas, efc_lines, scenarios[0], rules)
    assert info.value.emergency == scenarios[0]
    results = await solve_emergencies(
        efc_areas, efc_lines, scenarios, rules, config=solver_config
    )
    assert all(isinstance(result, NoSecureControlError) for result in results)
    assert [result.emergency.faulted_line for result in results] == ["L1", "L3"]


@pytest.mark.asyncio
async def test_blocking_efc_inside_event_loop(efc_areas, efc_lines, band_rules):
    scenario = EmergencyScenario.from_fault(efc_lines[0], areas=AREAS)
    problem = build_efc_problem(efc_areas, efc_lines, scenario, band_rules)
    with pytest.raises(RuntimeError, match="await solve_efc_async"):
        solve_efc(problem)
