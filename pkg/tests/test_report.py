"""Test plan tables, the mode comparison and run manifests."""

import pandas as pd
import pytest

from gridnadir.base.error import DataError
from gridnadir.manifest import RunManifest, sha256, write_manifest
from gridnadir.planner import (
    PlanningMode,
    PlanningOptions,
    ValidationReport,
    build_planning_model,
    compare_modes,
    solve_plan,
    write_report,
)
from gridnadir.planner.report import cost_table, emergency_table, installation_table
from gridnadir.planner.validation import NadirEntry


@pytest.fixture
def plan(toy_system, solver_config):
    options = PlanningOptions(mode=PlanningMode.NONFC)
    yield solve_plan(build_planning_model(toy_system, options), solver_config)


def report(mode: str, nadir_a: float, nadir_b: float) -> ValidationReport:
    entries = [
        NadirEntry(
            scenario="day",
            period=0,
            faulted_line="dcAB",
            area=area,
            imbalance=value,
            nadir=nadir,
            secure=nadir <= 0.5,
        )
        for area, value, nadir in (("A", 100.0, nadir_a), ("B", -100.0, nadir_b))
    ]
    return ValidationReport(mode=mode, entries=entries)


def test_installation_table(plan):
    table = installation_table(plan)
    assert list(table.columns) == ["kind", "id", "built", "increments", "capacity_mw"]
    assert list(table["id"]) == ["cAB"]
    assert table["capacity_mw"].iloc[0] == pytest.approx(150.0)


def test_cost_table_adds_up(plan):
    row = cost_table(plan).iloc[0]
    assert row["mode"] == "nonfc"
    assert row["total"] == pytest.approx(
        row["investment"] + row["operational"] + row["emergency"]
    )


def test_emergency_table(plan):
    table = emergency_table(plan)
    # two lines faulted in two periods, one row per area
    assert len(table) == 2 * 2 * 2
    assert set(table["region"]) == {-1}
    assert table["cost"].sum() == 0.0


def test_write_report(tmp_path, plan):
    paths = write_report(plan, tmp_path / "out")
    assert [path.name for path in paths] == [
        "installations.csv",
        "costs.csv",
        "emergencies.csv",
    ]
    paths = write_report(plan, tmp_path / "out", report("nonfc", 0.2, 0.7))
    nadirs = pd.read_csv(paths[-1])
    assert list(nadirs["secure"]) == [True, False]


def test_validation_summary():
    summary = report("fc", 0.2, 0.7)
    assert summary.emergency_count == 1
    assert summary.secure_share == 0.0
    assert summary.worst() == {"A": 0.2, "B": 0.7}
    assert summary.worst_nadir == 0.7
    assert [entry.area for entry in summary.violations] == ["B"]
    assert ValidationReport(mode="fc").secure_share == 1.0


def test_compare_modes(plan):
    table = compare_modes(
        {"nonfc": (plan, report("nonfc", 0.3, 0.9)), "fcec": (plan, report("fcec", 0.1, 0.4))}
    )
    assert list(table.index) == ["nonfc", "fcec"]
    assert list(table.columns) == [
        "total_cost",
        "investment_cost",
        "operational_cost",
        "max_deviation_A",
        "max_deviation_B",
    ]
    assert table.loc["fcec", "max_deviation_B"] == pytest.approx(0.4)


def test_manifest(tmp_path):
    artifact = tmp_path / "trace.csv"
    artifact.write_text("t,df\n0,0\n")
    source = tmp_path / "model.json"
    source.write_text("{}")
    manifest = RunManifest.build(
        "simulate",
        {"imbalance": -100.0},
        {"model": str(source), "rules": "not-a-file"},
        [artifact],
        seed=5,
        relative_to=tmp_path,
    )
    assert manifest.artifacts == {"trace.csv": sha256(artifact)}
    assert list(manifest.input_hashes) == [str(source)]
    path = write_manifest(manifest, tmp_path)
    assert path.name == "simulate.manifest.json"
    assert RunManifest.from_file(path) == manifest

    assert manifest.verify(tmp_path) == {"trace.csv": True}
    artifact.write_text("changed\n")
    assert manifest.verify(tmp_path) == {"trace.csv": False}
    artifact.unlink()
    with pytest.raises(DataError):
        manifest.verify(tmp_path)
