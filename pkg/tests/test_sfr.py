"""Test the area frequency response."""

import numpy as np
import pytest
from scipy import signal

from gridnadir import sfr
from gridnadir.base.error import DataError


def test_trace_shape_and_start(thermal_model):
    trace = sfr.simulate(thermal_model, -100.0, dt=0.01, horizon=5.0)
    assert len(trace.samples) == 501
    assert trace.samples[0] == 0.0
    assert trace.times[-1] == pytest.approx(5.0)
    assert trace.samples.min() < 0.0


def test_shortage_lowers_frequency_and_surplus_raises_it(thermal_model):
    low = sfr.simulate(thermal_model, -100.0, dt=0.01, horizon=5.0)
    high = sfr.simulate(thermal_model, 100.0, dt=0.01, horizon=5.0)
    np.testing.assert_allclose(low.samples, -high.samples)


def test_response_is_linear_in_imbalance(thermal_model):
    one = sfr.simulate(thermal_model, -50.0, dt=0.01, horizon=5.0)
    two = sfr.simulate(thermal_model, -100.0, dt=0.01, horizon=5.0)
    np.testing.assert_allclose(two.samples, 2.0 * one.samples, atol=1e-12)


def test_immediate_full_compensation_cancels_the_disturbance(thermal_model):
    efc = sfr.EfcAction(epc_power=100.0, epc_delay=0.0, dlc_delay=0.0)
    trace = sfr.simulate(thermal_model, -100.0, efc, dt=0.01, horizon=5.0)
    assert np.abs(trace.samples).max() == pytest.approx(0.0, abs=1e-12)


def test_emergency_power_reduces_the_nadir(thermal_model):
    none, _ = sfr.nadir(sfr.simulate(thermal_model, -200.0, dt=0.01, horizon=10.0))
    efc = sfr.EfcAction(epc_power=80.0, dlc_power=20.0)
    helped, _ = sfr.nadir(sfr.simulate(thermal_model, -200.0, efc, dt=0.01, horizon=10.0))
    assert helped < none


def test_settles_to_quasi_steady_state(storage_model):
    """Deviation converges to dP f0 / (D_load + sum of droop gains)."""
    trace = sfr.simulate(storage_model, -110.0, dt=1e-3, horizon=30.0)
    expected = sfr.quasi_steady_state(storage_model, -110.0)
    assert expected == pytest.approx(-110.0 / 1100.0 * 60.0)
    assert trace.samples[-1] == pytest.approx(expected, rel=1e-4)


def test_nadir_reports_magnitude_and_time():
    trace = sfr.FrequencyTrace(dt=0.5, horizon=2.0, samples=[0.0, -0.2, -0.4, -0.3, -0.1])
    assert sfr.nadir(trace) == pytest.approx((0.4, 1.0))
    assert trace.at(1.5) == pytest.approx(-0.3)


def test_trace_length_must_match_horizon():
    with pytest.raises(ValueError):
        sfr.FrequencyTrace(dt=0.5, horizon=2.0, samples=[0.0, 0.1])


def test_horizon_must_cover_delays(thermal_model):
    with pytest.raises(DataError):
        sfr.simulate(thermal_model, -100.0, sfr.EfcAction(dlc_delay=2.0), dt=0.01, horizon=1.0)


def test_zero_inertia_is_rejected():
    model = sfr.AreaDynamicModel(
        thermal=[
            sfr.ThermalUnitDyn(inertia_const=5.0, p_max=100.0, droop=0.05, committed=False)
        ],
        load_damping=10.0,
    )
    with pytest.raises(DataError):
        sfr.simulate(model, -10.0, dt=0.01, horizon=1.0)


def test_uncommitted_units_do_not_respond(thermal_model):
    offline = sfr.ThermalUnitDyn(inertia_const=6.0, p_max=300.0, droop=0.04, committed=False)
    extended = thermal_model.copy(update={"thermal": [*thermal_model.thermal, offline]})
    assert extended.inertia == thermal_model.inertia
    assert extended.dc_gain() == pytest.approx(thermal_model.dc_gain())
    np.testing.assert_allclose(
        sfr.step_response(extended, 0.01, 3.0), sfr.step_response(thermal_model, 0.01, 3.0)
    )


def test_hydro_unit_model_simulates():
    model = sfr.build_area_model(
        [sfr.HydroUnitDyn(inertia_const=3.0, p_max=200.0)], load_damping=200.0
    )
    trace = sfr.simulate(model, -50.0, dt=0.01, horizon=20.0)
    assert np.all(np.isfinite(trace.samples))
    assert trace.samples.min() < 0.0
    assert model.dc_gain() == pytest.approx(200.0 + 200.0 / 0.08)


def test_batch_nadirs_match_single_simulations(thermal_model):
    dt, horizon = 0.01, 8.0
    response = sfr.step_response(thermal_model, dt, horizon)
    imbalances = np.array([-150.0, 120.0])
    epc = np.array([40.0, -10.0])
    dlc = np.array([5.0, 0.0])
    batch = sfr.batch_nadirs(
        response, dt, imbalances, epc, dlc, 0.2, 0.6, thermal_model.base_frequency
    )
    for index in range(2):
        efc = sfr.EfcAction(epc_power=epc[index], dlc_power=dlc[index])
        trace = sfr.simulate(thermal_model, imbalances[index], efc, dt=dt, horizon=horizon)
        assert batch[index] == pytest.approx(sfr.nadir(trace)[0])


def test_compare_configurations(thermal_model):
    results = sfr.compare_efc_configurations(
        thermal_model, -200.0, 60.0, 20.0, dt=0.01, horizon=10.0
    )
    assert set(results) == {"none", "dlc", "epc", "both"}
    assert results["both"]["nadir_hz"] < results["epc"]["nadir_hz"] < results["none"]["nadir_hz"]
    assert results["both"]["qss_hz"] == pytest.approx(
        sfr.quasi_steady_state(thermal_model, -120.0)
    )


def test_later_activation_never_helps(thermal_model):
    efc = sfr.EfcAction(epc_power=60.0, dlc_power=20.0)
    rows = sfr.delay_sensitivity(thermal_model, -200.0, efc, dt=0.01, horizon=10.0)
    assert len(rows) == len(sfr.DEFAULT_DELAY_PAIRS)
    assert rows[0]["nadir_hz"] <= rows[-1]["nadir_hz"]


def test_trace_file(tmp_path, thermal_model):
    trace = sfr.simulate(thermal_model, -100.0, dt=0.01, horizon=2.0)
    path = sfr.write_trace(trace, tmp_path / "trace.csv")
    loaded = sfr.read_trace(path)
    assert loaded.dt == pytest.approx(0.01)
    np.testing.assert_allclose(loaded.samples, trace.samples, rtol=1e-9, atol=1e-12)


def test_area_model_file(tmp_path, thermal_model):
    path = thermal_model.to_file(tmp_path / "area.json")
    assert sfr.AreaDynamicModel.from_file(path) == thermal_model


def test_inertia_and_damping_only_matches_the_closed_form():
    """2H d(df)/dt = dP - D df has df(t) = dP / D (1 - exp(-D t / 2H))."""
    model = sfr.build_area_model([], load_damping=400.0, fixed_inertia=1000.0)
    trace = sfr.simulate(model, -80.0, dt=1e-3, horizon=10.0)
    expected = -80.0 / 400.0 * (1.0 - np.exp(-400.0 * trace.times / 2000.0))
    np.testing.assert_allclose(trace.per_unit, expected, atol=1e-9)


def test_earlier_control_beats_later_control_of_equal_size(thermal_model):
    results = sfr.compare_efc_configurations(
        thermal_model, -200.0, 50.0, 50.0, dt=0.01, horizon=10.0
    )
    nadirs = [results[name]["nadir_hz"] for name in ("none", "dlc", "epc", "both")]
    assert nadirs == sorted(nadirs, reverse=True)
    assert nadirs[0] > nadirs[1] > nadirs[2] > nadirs[3]
    assert results["dlc"]["qss_hz"] == pytest.approx(results["epc"]["qss_hz"])


def test_nadir_grows_with_every_delay_step(thermal_model):
    efc = sfr.EfcAction(epc_power=60.0, dlc_power=20.0)
    rows = sfr.delay_sensitivity(thermal_model, -200.0, efc, dt=0.01, horizon=10.0)
    nadirs = [row["nadir_hz"] for row in rows]
    assert all(later >= earlier - 1e-12 for earlier, later in zip(nadirs, nadirs[1:]))


def test_mixed_fleet_settles_to_quasi_steady_state():
    model = sfr.build_area_model(
        [
            sfr.ThermalUnitDyn(inertia_const=5.0, p_max=400.0, droop=0.05),
            sfr.HydroUnitDyn(inertia_const=3.0, p_max=200.0),
            sfr.StorageUnitDyn(p_max=50.0),
        ],
        load_damping=300.0,
    )
    trace = sfr.simulate(model, -150.0, dt=0.01, horizon=120.0)
    expected = sfr.quasi_steady_state(model, -150.0)
    assert trace.per_unit[-1] == pytest.approx(expected / 60.0, abs=1e-3)


def test_halving_dt_keeps_the_nadir(thermal_model):
    coarse = sfr.simulate(thermal_model, -200.0, dt=1e-3, horizon=10.0)
    fine = sfr.simulate(thermal_model, -200.0, dt=5e-4, horizon=10.0)
    assert sfr.nadir(fine)[0] == pytest.approx(sfr.nadir(coarse)[0], abs=1e-5)
    np.testing.assert_allclose(fine.samples[::2], coarse.samples, atol=1e-5)


def test_hydro_governor_first_moves_the_wrong_way():
    unit = sfr.HydroUnitDyn(inertia_const=3.0, p_max=200.0)
    num, den = unit.transfer_function()
    times = np.linspace(0.0, 0.05, 51)
    _, output = signal.step((num, den), T=times)
    assert np.all(output[1:] < 0.0)
    assert num[-1] / den[-1] == pytest.approx(200.0 / 0.08)

    hydro = sfr.build_area_model([unit], load_damping=200.0)
    free = sfr.build_area_model([], load_damping=200.0, fixed_inertia=hydro.inertia)
    early = slice(5, 31)
    hydro_trace = sfr.simulate(hydro, -50.0, dt=0.01, horizon=1.0).samples[early]
    free_trace = sfr.simulate(free, -50.0, dt=0.01, horizon=1.0).samples[early]
    assert np.all(hydro_trace <= free_trace)
    assert hydro_trace[-1] < free_trace[-1]
    assert sfr.quasi_steady_state(hydro, -50.0) == pytest.approx(
        -50.0 / (200.0 + 200.0 / 0.08) * 60.0
    )


def test_traces_of_different_imbalances_add_up(thermal_model):
    first = sfr.simulate(thermal_model, -70.0, dt=0.01, horizon=5.0)
    second = sfr.simulate(thermal_model, 25.0, dt=0.01, horizon=5.0)
    total = sfr.simulate(thermal_model, -45.0, dt=0.01, horizon=5.0)
    np.testing.assert_allclose((first + second).samples, total.samples, atol=1e-9)


@pytest.mark.parametrize("control", ["epc_power", "dlc_power"])
def test_nadir_falls_with_every_control_step(thermal_model, control):
    response = sfr.step_response(thermal_model, 0.01, 15.0)
    nadirs = []
    for magnitude in np.linspace(0.0, 150.0, 12):
        efc = sfr.EfcAction(**{control: magnitude})
        samples = sfr.superpose(response, 0.01, -200.0, efc)
        nadirs.append(np.abs(samples).max())
    assert all(later < earlier for earlier, later in zip(nadirs, nadirs[1:]))


def test_control_after_the_nadir_changes_nothing(thermal_model):
    uncontrolled, at = sfr.nadir(
        sfr.simulate(thermal_model, -200.0, dt=0.01, horizon=15.0)
    )
    late = sfr.EfcAction(
        epc_power=60.0, epc_delay=at + 0.5, dlc_power=20.0, dlc_delay=at + 1.0
    )
    controlled, _ = sfr.nadir(
        sfr.simulate(thermal_model, -200.0, late, dt=0.01, horizon=15.0)
    )
    assert controlled == pytest.approx(uncontrolled, abs=1e-6)


def test_slowest_delays_stay_near_the_uncontrolled_nadir(storage_model):
    uncontrolled, _ = sfr.nadir(
        sfr.simulate(storage_model, -20.0, dt=0.01, horizon=10.0)
    )
    efc = sfr.EfcAction(epc_power=5.0, dlc_power=2.0)
    rows = sfr.delay_sensitivity(storage_model, -20.0, efc, dt=0.01, horizon=10.0)
    nadirs = [row["nadir_hz"] for row in rows]
    assert all(later >= earlier - 1e-12 for earlier, later in zip(nadirs, nadirs[1:]))
    assert rows[-1]["epc_delay_s"] == 1.5 and rows[-1]["dlc_delay_s"] == 2.0
    assert nadirs[-1] == pytest.approx(uncontrolled, rel=0.05)
    assert nadirs[0] < nadirs[-1]


def random_fleet(seed: int) -> sfr.AreaDynamicModel:
    rng = np.random.default_rng(seed)
    units = [
        sfr.ThermalUnitDyn(
            inertia_const=rng.uniform(2.0, 8.0),
            p_max=rng.uniform(100.0, 500.0),
            droop=rng.uniform(0.04, 0.08),
            hp_fraction=rng.uniform(0.2, 0.4),
            gov_tc=rng.uniform(0.2, 0.5),
            chest_tc=rng.uniform(0.2, 0.5),
            reheat_tc=rng.uniform(5.0, 12.0),
            committed=bool(index == 0 or rng.random() < 0.7),
        )
        for index in range(rng.integers(1, 4))
    ]
    units += [
        sfr.HydroUnitDyn(
            inertia_const=rng.uniform(2.0, 4.0), p_max=rng.uniform(50.0, 200.0)
        )
        for _ in range(rng.integers(0, 2))
    ]
    units += [
        sfr.StorageUnitDyn(p_max=rng.uniform(20.0, 80.0), delay_tc=rng.uniform(0.2, 0.8))
        for _ in range(rng.integers(0, 2))
    ]
    return sfr.build_area_model(units, load_damping=rng.uniform(100.0, 1000.0))


@pytest.mark.parametrize("seed", range(20))
def test_random_fleets_settle_to_quasi_steady_state(seed):
    model = random_fleet(seed)
    imbalance = -np.random.default_rng(100 + seed).uniform(50.0, 200.0)
    trace = sfr.simulate(model, imbalance, dt=0.02, horizon=300.0)
    expected = sfr.quasi_steady_state(model, imbalance) / model.base_frequency
    assert trace.per_unit[-1] == pytest.approx(expected, abs=1e-3)
