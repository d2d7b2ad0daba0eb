"""Test MILP modelling, LP files and the solver adapters."""

import json
import math
import shutil
import sys

import numpy as np
import pytest

from gridnadir.base.error import (
    ModelError,
    SolutionParseError,
    SolverNotFoundError,
    UsageError,
)
from gridnadir.milp import (
    MilpModel,
    Solution,
    SolverConfig,
    SolveStatus,
    VarKind,
    linear_terms,
    solve,
    solve_async,
    solve_many,
    write_lp,
)
from gridnadir.milp.lp_format import mapping_path
from gridnadir.milp.model import var_range


def knapsack() -> MilpModel:
    """max 5a + 4b + 3c s.t. 2a + 3b + c <= 5 over binaries; optimum 9 at a = b = 1."""
    model = MilpModel("knapsack")
    a = model.add_var("a", VarKind.BINARY)
    b = model.add_var("b", VarKind.BINARY)
    c = model.add_var("c", VarKind.BINARY)
    model.add_constraint(2 * a + 3 * b + c, "<=", 5, name="weight")
    model.set_objective(-(5 * a + 4 * b + 3 * c))
    return model


def named(terms):
    return {var.local_name: coef for var, coef in terms}


def test_linear_terms():
    model = MilpModel()
    x = model.add_var("x")
    y = model.add_var("y")
    terms, constant = linear_terms(2 * x + y - 3)
    assert named(terms) == {"x": 2.0, "y": 1.0}
    assert constant == -3.0
    assert named(linear_terms(2 * x + y - y)[0]) == {"x": 2.0}
    assert linear_terms(4.5) == ([], 4.5)
    model.fix(y, 4.0)
    terms, constant = linear_terms(2 * x + y - 3)
    assert named(terms) == {"x": 2.0}
    assert constant == 1.0
    with pytest.raises(ModelError):
        linear_terms(x * x)


def test_model_rejects_bad_input():
    model = MilpModel()
    x = model.add_var("x", upper=4.0)
    with pytest.raises(ModelError):
        model.add_var("x")
    with pytest.raises(ModelError):
        model.add_var("bad", lower=2.0, upper=1.0)
    with pytest.raises(ModelError):
        model.fix(x, 5.0)
    with pytest.raises(ModelError):
        model.add_constraint(1.0, "<=", 0.0)
    with pytest.raises(ModelError):
        model.add_constraint(x * math.inf, "<=", 0.0)
    assert model.add_constraint(-1.0, "<=", 0.0) is None
    other = MilpModel("other")
    foreign = other.add_var("z")
    with pytest.raises(ModelError):
        model.add_constraint(x + foreign, "<=", 1.0)
    with pytest.raises(ModelError):
        model.var("missing")


def test_rows_are_pyomo_constraints():
    model = knapsack()
    row = model.row("weight")
    assert row.ub == 5.0
    assert row.lb is None
    assert named(linear_terms(row.body)[0]) == {"a": 2.0, "b": 3.0, "c": 1.0}
    assert model.num_constraints == 1


def test_binaries_are_clipped():
    model = MilpModel()
    z = model.add_var("z", VarKind.BINARY, -5.0, 5.0)
    assert var_range(z) == (0.0, 1.0)
    assert z.is_binary()


def test_bounds_of():
    model = MilpModel()
    x = model.add_var("x", lower=-1.0, upper=2.0)
    y = model.add_var("y", lower=0.0, upper=3.0)
    assert model.bounds_of(2 * x - y + 1) == (-4.0, 5.0)
    model.fix(y, 1.0)
    assert model.bounds_of(2 * x - y + 1) == (-2.0, 4.0)


def test_matrix_form_folds_fixed_variables():
    model = knapsack()
    model.fix(model.var("b"), 1.0)
    form = model.matrix_form()
    assert form.matrix.toarray().tolist() == [[2.0, 0.0, 1.0]]
    assert form.row_upper.tolist() == [2.0]
    assert (form.lower[1], form.upper[1]) == (1.0, 1.0)
    assert form.offset == -4.0
    assert form.integrality.tolist() == [1, 1, 1]


def test_solve_in_process():
    solution = solve(knapsack(), SolverConfig(solver="scipy"))
    assert solution.status is SolveStatus.OPTIMAL
    assert solution.objective == pytest.approx(-9.0)
    assert solution.values == {"a": 1.0, "b": 1.0, "c": 0.0}


def test_solution_evaluates_expressions():
    model = knapsack()
    a, b = model.var("a"), model.var("b")
    solution = solve(model)
    assert solution.value(a) == 1.0
    assert solution.value("b") == 1.0
    assert solution.value(2 * a - b + 0.5) == pytest.approx(1.5)
    assert solution.evaluate(model.objective) == pytest.approx(solution.objective)


def test_solve_reports_infeasibility():
    model = MilpModel("infeasible")
    x = model.add_var("x", upper=1.0)
    model.add_constraint(x, ">=", 2.0)
    model.set_objective(x)
    solution = solve(model)
    assert solution.status is SolveStatus.INFEASIBLE
    assert not solution.has_values
    assert solution.objective is None


def test_zero_time_limit_returns_the_starting_point():
    model = knapsack()
    model.fix(model.var("c"), 1.0)
    solution = solve(model, SolverConfig(solver="scipy", time_limit=0.0))
    assert solution.status is SolveStatus.LIMIT
    assert not solution.incumbent
    assert solution.values == {"a": 0.0, "b": 0.0, "c": 1.0}
    assert solution.objective == pytest.approx(-3.0)
    assert solution.value("c") == 1.0


def test_empty_model():
    model = MilpModel()
    model.set_objective(4.0)
    solution = solve(model)
    assert solution.status is SolveStatus.OPTIMAL
    assert solution.objective == 4.0
    assert solution.values == {}


@pytest.mark.asyncio
async def test_solve_many_keeps_order():
    models = [knapsack() for _ in range(3)]
    models[1].fix(models[1].var("a"), 0.0)
    solutions = await solve_many(models, SolverConfig(solver="scipy"), jobs=2)
    assert [round(solution.objective) for solution in solutions] == [-9, -7, -9]


@pytest.mark.asyncio
async def test_blocking_solve_inside_event_loop():
    with pytest.raises(RuntimeError, match="await solve_async"):
        solve(knapsack())
    solution = await solve_async(knapsack())
    assert solution.objective == pytest.approx(-9.0)


@pytest.mark.asyncio
async def test_missing_executable():
    with pytest.raises(SolverNotFoundError) as info:
        await solve_async(knapsack(), SolverConfig(solver="/nonexistent/cbc"))
    assert info.value.exit_code == 3


@pytest.mark.asyncio
async def test_executable_without_dialect():
    with pytest.raises(UsageError):
        await solve_async(knapsack(), SolverConfig(solver=sys.executable))


def test_dialect_guess():
    assert SolverConfig(solver="/opt/bin/cbc").resolved_dialect() == "cbc"
    assert SolverConfig(solver="/opt/bin/glpsol").resolved_dialect() == "glpk"
    assert SolverConfig(solver="/opt/bin/x", dialect="cbc").resolved_dialect() == "cbc"
    with pytest.raises(UsageError):
        SolverConfig(solver="/opt/bin/highs").resolved_dialect()


def test_solver_options():
    cbc = SolverConfig(solver="cbc", gap=1e-4, time_limit=2.5, threads=2, seed=3)
    assert cbc.options() == {"ratioGap": 1e-4, "threads": 2, "randomCbcSeed": 4, "sec": 2.5}
    glpk = SolverConfig(solver="glpsol", gap=1e-4, time_limit=2.5)
    assert glpk.options() == {"mipgap": 1e-4, "seed": 0, "tmlim": 3}


def test_solver_config_from_environment(monkeypatch):
    monkeypatch.setenv("GRIDNADIR_SOLVER", "/usr/bin/cbc")
    monkeypatch.setenv("GRIDNADIR_TIME_LIMIT", "12.5")
    config = SolverConfig()
    assert config.solver == "/usr/bin/cbc"
    assert config.time_limit == 12.5
    assert not config.in_process


def test_lp_file_names_and_sections(tmp_path):
    model = knapsack()
    extra = model.add_var("x y", lower=-math.inf, upper=math.inf)
    model.add_constraint(extra - model.var("a"), "=", 0.5, name="2link")
    text, mapping = write_lp(model, tmp_path / "model.lp")
    lowered = text.lower()
    assert "s.t." in lowered or "subject to" in lowered
    assert "binary" in lowered
    assert lowered.rstrip().endswith("end")
    (label,) = [key for key, name in mapping["variables"].items() if name == "x y"]
    assert " " not in label
    assert label in text
    assert "2link" in text
    assert json.loads(mapping_path(tmp_path / "model.lp").read_text()) == mapping


def test_lp_file_is_deterministic(tmp_path):
    def random_model() -> MilpModel:
        rng = np.random.default_rng(7)
        model = MilpModel("random")
        kinds = [VarKind.CONTINUOUS, VarKind.INTEGER, VarKind.BINARY]
        variables = [
            model.add_var("v{}".format(index), kinds[index % 3], -5.0, 5.0)
            for index in range(50)
        ]
        for row in range(20):
            picks = rng.choice(50, size=6, replace=False)
            coefs = rng.integers(-9, 10, size=6)
            model.add_constraint(
                sum(int(coef) * variables[pick] for coef, pick in zip(coefs, picks)),
                "<=",
                float(rng.integers(1, 20)),
                name="r{}".format(row),
            )
        model.set_objective(sum(variables[:10]))
        return model

    first, mapping = write_lp(random_model(), tmp_path / "first.lp")
    second, _ = write_lp(random_model(), tmp_path / "second.lp")
    assert first == second
    written = {name: label for label, name in mapping["variables"].items()}
    for index in range(50):
        name = "v{}".format(index)
        assert written.get(name, name) in first


@pytest.mark.parametrize("executable", ["cbc", "glpsol"])
def test_external_solver(executable):
    path = shutil.which(executable)
    if path is None:
        pytest.skip("{} is not installed".format(executable))
    solution = solve(knapsack(), SolverConfig(solver=path))
    assert solution.status is SolveStatus.OPTIMAL
    assert solution.objective == pytest.approx(-9.0)
    assert solution.values == pytest.approx({"a": 1.0, "b": 1.0, "c": 0.0})


def test_solution_records_check_values_against_status():
    with pytest.raises(ValueError):
        Solution(status=SolveStatus.OPTIMAL)
    with pytest.raises(ValueError):
        Solution(status=SolveStatus.LIMIT)
    with pytest.raises(ValueError):
        Solution(status=SolveStatus.INFEASIBLE, values={"x": 1.0}, objective=1.0)
    with pytest.raises(ValueError):
        Solution(status=SolveStatus.LIMIT, objective=1.0)
    with pytest.raises(ValueError):
        Solution(
            status=SolveStatus.OPTIMAL, objective=1.0, values={"x": 2.0}, incumbent=False
        )
    found = Solution(status=SolveStatus.LIMIT, objective=1.0, values={"x": 2.0})
    assert found.incumbent and found.value("x") == 2.0
    start = Solution(
        status=SolveStatus.LIMIT, objective=0.0, values={"x": 0.0}, incumbent=False
    )
    assert start.has_values and not start.incumbent
    infeasible = Solution(status=SolveStatus.INFEASIBLE)
    assert not infeasible.incumbent
    with pytest.raises(SolutionParseError):
        infeasible.value("x")
