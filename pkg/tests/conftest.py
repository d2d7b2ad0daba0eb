"""Common fixtures for testing."""

import logging

import numpy as np
import pytest

from gridnadir import sfr
from gridnadir.aggregation import EquivalentParams
from gridnadir.efc import AreaResources, HvdcLine
from gridnadir.milp import SolverConfig
from gridnadir.planner import PlanningSystem
from gridnadir.wodt import SecureRegion

LOGGER = logging.getLogger(__name__)


def net_band_region(limit: float, leaf_id: int = 0) -> SecureRegion:
    """Secure while the net post-fault imbalance stays within +-limit MW.

    The net imbalance is ``dp_d + dp_epc + dp_dlc``; DLC only counts toward
    the lower side since it can only relieve a shortage.
    """
    return SecureRegion(
        leaf_id=leaf_id,
        coeffs=[[0.0, 0.0, 0.0, 1.0, 1.0, 1.0], [0.0, 0.0, 0.0, -1.0, 0.0, -1.0]],
        bias=[limit, limit],
    )


@pytest.fixture
def solver_config():
    """In-process solver with a tight gap."""
    yield SolverConfig(solver="scipy", gap=1e-9)


@pytest.fixture
def thermal_model():
    """One committed reheat unit with proportional load damping."""
    yield sfr.AreaDynamicModel(
        thermal=[sfr.ThermalUnitDyn(inertia_const=5.0, p_max=500.0, droop=0.05)],
        load_damping=500.0,
    )


@pytest.fixture
def storage_model():
    """Fast first-order area: fixed inertia plus one storage unit."""
    yield sfr.AreaDynamicModel(
        storage=[sfr.StorageUnitDyn(p_max=50.0, droop=0.05, delay_tc=0.5)],
        load_damping=100.0,
        fixed_inertia=100.0,
    )


@pytest.fixture
def band_rules():
    """Every area secure within +-50 MW of net imbalance."""
    yield {area: [net_band_region(50.0)] for area in ("A", "B", "C")}


@pytest.fixture
def efc_areas():
    """Three areas with identical capability and a 20 MW DLC allowance."""
    params = EquivalentParams(inertia=2500.0, d_fast=3500.0, d_slow=7000.0)
    yield [AreaResources(id=area, params=params, dlc_max=20.0) for area in "ABC"]


@pytest.fixture
def efc_lines():
    """Two parallel A->B links and one B->C link."""
    yield [
        HvdcLine(id="L1", from_area="A", to_area="B", capacity=300.0, prefault_flow=100.0),
        HvdcLine(id="L2", from_area="A", to_area="B", capacity=300.0),
        HvdcLine(id="L3", from_area="B", to_area="C", capacity=200.0),
    ]


def toy_system_data() -> dict:
    """Two single-bus areas joined by an existing and a candidate HVDC link."""
    return {
        "areas": [
            {"id": "A", "fixed_inertia": 500.0},
            {"id": "B", "fixed_inertia": 500.0},
        ],
        "buses": [{"id": "a1", "area": "A"}, {"id": "b1", "area": "B"}],
        "dc_lines": [{"id": "dcAB", "from_bus": "a1", "to_bus": "b1", "capacity": 100.0}],
        "thermal": [
            {
                "id": "gA",
                "bus": "a1",
                "p_min": 0.0,
                "p_max": 300.0,
                "ramp_up": 300.0,
                "ramp_down": 300.0,
                "segments": [{"size": 300.0, "marginal_cost": 10.0}],
                "inertia_const": 5.0,
            },
            {
                "id": "gB",
                "bus": "b1",
                "p_min": 0.0,
                "p_max": 300.0,
                "ramp_up": 300.0,
                "ramp_down": 300.0,
                "segments": [{"size": 300.0, "marginal_cost": 50.0}],
                "inertia_const": 4.0,
            },
        ],
        "hvdc_candidates": [
            {
                "id": "cAB",
                "from_bus": "a1",
                "to_bus": "b1",
                "fixed_cost": 1000.0,
                "capacity_cost": 100.0,
                "p_cap_min": 50.0,
                "p_cap_max": 200.0,
                "cap_increment": 50.0,
            }
        ],
        "scenarios": [
            {"id": "day", "weight": 1.0, "loads": {"a1": [50.0, 60.0], "b1": [200.0, 220.0]}}
        ],
        "period_hours": 1.0,
        "emergencies": {"probability": 1e-4, "period_stride": 1},
    }


@pytest.fixture
def toy_system():
    """Resolved two-area planning system."""
    yield PlanningSystem.deserialize(toy_system_data())


@pytest.fixture
def toy_rules():
    """Band rules for the two toy areas."""
    yield {"A": [net_band_region(50.0)], "B": [net_band_region(50.0)]}


@pytest.fixture
def separable_data():
    """Rows labelled insecure when dp_epc + dp_d is negative."""
    rng = np.random.default_rng(7)
    features = rng.uniform(-1.0, 1.0, size=(400, 6)) * [1000, 500, 800, 100, 10, 300]
    labels = (features[:, 3] + features[:, 5] < 0).astype(int)
    yield features, labels


@pytest.fixture
def make_region():
    """Factory of net-imbalance band regions."""
    yield net_band_region


@pytest.fixture
def toy_data():
    """Raw toy system document, free to modify."""
    yield toy_system_data()
