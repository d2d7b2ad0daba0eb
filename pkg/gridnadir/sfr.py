"""Area frequency response simulation with delayed-step emergency controls."""

import logging
from pathlib import Path
from typing import ClassVar, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import Field, root_validator
from scipy import signal
from typing_extensions import Annotated

from .base import FrozenRecord
from .base.error import DataError, SimulationError
from .valid import FiniteFloat, FloatArray, Fraction

LOGGER = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
DEFAULT_HORIZON = 30.0
DEFAULT_BASE_FREQUENCY = 60.0

Polynomial = np.ndarray


class ThermalUnitDyn(FrozenRecord):
    """Reheat steam unit with droop governor."""

    inertia_const: Annotated[float, Field(description="H_k in s", ge=0)]
    p_max: Annotated[float, Field(description="Rating in MW", gt=0)]
    droop: Annotated[float, Field(description="R_k in p.u.", gt=0)]
    gov_tc: Annotated[float, Field(description="T_G,k in s", gt=0)] = 0.5
    chest_tc: Annotated[float, Field(description="T_C,k in s", gt=0)] = 0.5
    reheat_tc: Annotated[float, Field(description="T_R,k in s", gt=0)] = 12.0
    hp_fraction: Annotated[Fraction, Field(description="F_H,k")] = 0.3
    committed: Annotated[bool, Field(description="u_k")] = True

    kind: ClassVar[str] = "thermal"

    @property
    def gain(self) -> float:
        """DC gain in MW per p.u. frequency, zero when offline."""
        return self.p_max / self.droop if self.committed else 0.0

    def transfer_function(self) -> Optional[Tuple[Polynomial, Polynomial]]:
        """Governor-turbine response to frequency, MW per p.u."""
        if not self.committed:
            return None
        num = self.gain * np.array([self.hp_fraction * self.reheat_tc, 1.0])
        den = np.polymul(
            np.polymul([self.gov_tc, 1.0], [self.chest_tc, 1.0]),
            [self.reheat_tc, 1.0],
        )
        return num, den


class HydroUnitDyn(FrozenRecord):
    """Hydro unit with transient droop governor and water hammer."""

    inertia_const: Annotated[float, Field(description="H_k in s", gt=0)]
    p_max: Annotated[float, Field(description="Rating in MW", gt=0)]
    perm_droop: Annotated[float, Field(description="R_P,k in p.u.", gt=0)] = 0.08
    temp_droop: Annotated[float, Field(description="R_T,k in p.u.", gt=0)] = 0.3
    gov_tc: Annotated[float, Field(description="T_G,k in s", gt=0)] = 0.5
    reset_tc: Annotated[float, Field(description="T_R,k in s", gt=0)] = 12.0
    water_tc: Annotated[float, Field(description="T_W,k in s", gt=0)] = 0.4

    kind: ClassVar[str] = "hydro"

    @property
    def gain(self) -> float:
        """DC gain in MW per p.u. frequency."""
        return self.p_max / self.perm_droop

    def transfer_function(self) -> Tuple[Polynomial, Polynomial]:
        """Governor-penstock response to frequency, MW per p.u."""
        num = self.gain * np.polymul([self.reset_tc, 1.0], [-self.water_tc, 1.0])
        transient_tc = self.temp_droop / self.perm_droop * self.reset_tc
        den = np.polymul(
            np.polymul([self.gov_tc, 1.0], [transient_tc, 1.0]),
            [self.water_tc / 2.0, 1.0],
        )
        return num, den


class StorageUnitDyn(FrozenRecord):
    """Converter-interfaced storage under droop control."""

    p_max: Annotated[float, Field(description="Rating in MW", gt=0)]
    droop: Annotated[float, Field(description="R_E,k in p.u.", gt=0)] = 0.05
    delay_tc: Annotated[float, Field(description="T_E,k in s", gt=0)] = 0.5

    kind: ClassVar[str] = "storage"

    @property
    def gain(self) -> float:
        """DC gain in MW per p.u. frequency."""
        return self.p_max / self.droop

    def transfer_function(self) -> Tuple[Polynomial, Polynomial]:
        """Droop response to frequency, MW per p.u."""
        return np.array([self.gain]), np.array([self.delay_tc, 1.0])


Unit = Union[ThermalUnitDyn, HydroUnitDyn, StorageUnitDyn]


class AreaDynamicModel(FrozenRecord):
    """Uniform-frequency model of one asynchronous area."""

    thermal: List[ThermalUnitDyn] = []
    hydro: List[HydroUnitDyn] = []
    storage: List[StorageUnitDyn] = []
    load_damping: Annotated[
        float, Field(description="D_load,a in MW per p.u. frequency", ge=0)
    ] = 0.0
    base_frequency: Annotated[float, Field(description="f0 in Hz", gt=0)] = (
        DEFAULT_BASE_FREQUENCY
    )
    fixed_inertia: Annotated[
        float,
        Field(description="Inertia without primary response, MW*s", ge=0),
    ] = 0.0

    @property
    def inertia(self) -> float:
        """Area inertia H_a in MW*s."""
        thermal = sum(
            unit.inertia_const * unit.p_max for unit in self.thermal if unit.committed
        )
        hydro = sum(unit.inertia_const * unit.p_max for unit in self.hydro)
        return self.fixed_inertia + thermal + hydro

    def units(self) -> List[Unit]:
        """All units in fixed order: thermal, hydro, storage."""
        return [*self.thermal, *self.hydro, *self.storage]

    def dc_gain(self) -> float:
        """Total frequency-to-power gain at s = 0, MW per p.u."""
        return self.load_damping + sum(unit.gain for unit in self.units())


class EfcAction(FrozenRecord):
    """Event-driven emergency control of one area, applied as delayed steps."""

    epc_power: Annotated[
        FiniteFloat, Field(description="Net HVDC injection change, MW")
    ] = 0.0
    epc_delay: Annotated[float, Field(description="tau_EPC in s", ge=0)] = 0.2
    dlc_power: Annotated[float, Field(description="Load reduction, MW", ge=0)] = 0.0
    dlc_delay: Annotated[float, Field(description="tau_DLC in s", ge=0)] = 0.6

    @classmethod
    def none(cls) -> "EfcAction":
        """No emergency control."""
        return cls()


class FrequencyTrace(FrozenRecord):
    """Sampled frequency deviation after a disturbance."""

    dt: Annotated[float, Field(gt=0)]
    horizon: Annotated[float, Field(ge=0)]
    samples: Annotated[FloatArray, Field(description="Deviation in Hz")]
    base_frequency: float = DEFAULT_BASE_FREQUENCY

    @root_validator(skip_on_failure=True)
    @classmethod
    def _length_matches_horizon(cls, values):
        expected = int(round(values["horizon"] / values["dt"])) + 1
        if len(values["samples"]) != expected:
            raise ValueError(
                "trace has {} samples, expected {}".format(
                    len(values["samples"]), expected
                )
            )
        return values

    @property
    def times(self) -> np.ndarray:
        """Sample times in s."""
        return np.arange(len(self.samples)) * self.dt

    @property
    def per_unit(self) -> np.ndarray:
        """Samples in p.u. of the base frequency."""
        return self.samples / self.base_frequency

    def at(self, time: float) -> float:
        """Deviation in Hz at the sample nearest to time."""
        return float(self.samples[int(round(time / self.dt))])

    def __add__(self, other: "FrequencyTrace") -> "FrequencyTrace":
        """Pointwise sum of two traces on the same grid."""
        if other.dt != self.dt or len(other.samples) != len(self.samples):
            raise ValueError("traces are sampled on different grids")
        return FrequencyTrace(
            dt=self.dt,
            horizon=self.horizon,
            samples=self.samples + other.samples,
            base_frequency=self.base_frequency,
        )


class StateSpace:
    """Closed-loop realization: swing integrator coupled to unit blocks."""

    def __init__(self, model: AreaDynamicModel):
        """Assemble A, B for the state [delta_f (p.u.), block states...]."""
        two_h = 2.0 * model.inertia
        if two_h <= 0:
            raise DataError(
                "Area has zero inertia; the swing equation is degenerate. "
                "Commit a thermal unit or add a hydro unit."
            )
        blocks = []
        for unit in model.units():
            tf = unit.transfer_function()
            if tf is None:
                continue
            a, b, c, d = signal.tf2ss(*tf)
            if np.any(d != 0):
                raise DataError("Unit response must be strictly proper")
            blocks.append((a, b, c))

        size = 1 + sum(a.shape[0] for a, _, _ in blocks)
        self.A = np.zeros((size, size))
        self.B = np.zeros(size)
        self.A[0, 0] = -model.load_damping / two_h
        self.B[0] = 1.0 / two_h
        offset = 1
        for a, b, c in blocks:
            order = a.shape[0]
            block = slice(offset, offset + order)
            self.A[block, block] = a
            self.A[block, 0] = b[:, 0]
            self.A[0, block] = -c[0] / two_h
            offset += order
        self.order = size
        self.base_frequency = model.base_frequency

    def rk4_step_matrices(self, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        """Exact one-step RK4 update x+ = M x + N u for piecewise constant u."""
        ha = dt * self.A
        eye = np.eye(self.order)
        ha2 = ha @ ha
        ha3 = ha2 @ ha
        transition = eye + ha + ha2 / 2.0 + ha3 / 6.0 + ha3 @ ha / 24.0
        forcing = dt * (eye + ha / 2.0 + ha2 / 6.0 + ha3 / 24.0) @ self.B
        return transition, forcing


def build_area_model(
    units: Sequence[Unit],
    load_damping: float,
    base_frequency: float = DEFAULT_BASE_FREQUENCY,
    fixed_inertia: float = 0.0,
) -> AreaDynamicModel:
    """Group units into an area model and check it can be realized."""
    model = AreaDynamicModel(
        thermal=[unit for unit in units if isinstance(unit, ThermalUnitDyn)],
        hydro=[unit for unit in units if isinstance(unit, HydroUnitDyn)],
        storage=[unit for unit in units if isinstance(unit, StorageUnitDyn)],
        load_damping=load_damping,
        base_frequency=base_frequency,
        fixed_inertia=fixed_inertia,
    )
    realization = StateSpace(model)
    LOGGER.debug(
        "Built area model: 2H=%.1f MW*s, %d states", 2 * model.inertia, realization.order
    )
    return model


def _sample_count(dt: float, horizon: float) -> int:
    if dt <= 0:
        raise DataError("dt must be positive, got {}".format(dt))
    if horizon < 0:
        raise DataError("horizon must be non-negative, got {}".format(horizon))
    return int(round(horizon / dt))


def step_response(
    model: AreaDynamicModel, dt: float = DEFAULT_DT, horizon: float = DEFAULT_HORIZON
) -> np.ndarray:
    """Deviation in p.u. after a +1 MW step applied at t = 0."""
    steps = _sample_count(dt, horizon)
    transition, forcing = StateSpace(model).rk4_step_matrices(dt)
    response = np.empty(steps + 1)
    state = np.zeros(transition.shape[0])
    response[0] = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, steps + 1):
            state = transition @ state + forcing
            response[k] = state[0]
    bad = np.flatnonzero(~np.isfinite(response))
    if bad.size:
        raise SimulationError(
            "Integration diverged at step {} (t={:.4f} s)".format(bad[0], bad[0] * dt),
            step=int(bad[0]),
            time=float(bad[0] * dt),
        )
    return response


def _shifted(response: np.ndarray, delay: float, dt: float) -> np.ndarray:
    shift = int(round(delay / dt))
    shifted = np.zeros_like(response)
    if shift < len(response):
        shifted[shift:] = response[: len(response) - shift]
    return shifted


def superpose(
    response: np.ndarray, dt: float, initial_imbalance: float, efc: EfcAction
) -> np.ndarray:
    """Combine a unit step response into the deviation (p.u.) under EFC."""
    return (
        initial_imbalance * response
        + efc.dlc_power * _shifted(response, efc.dlc_delay, dt)
        + efc.epc_power * _shifted(response, efc.epc_delay, dt)
    )


def simulate(
    model: AreaDynamicModel,
    initial_imbalance: float,
    efc: Optional[EfcAction] = None,
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
) -> FrequencyTrace:
    """Simulate the area after an imbalance; surplus is positive."""
    efc = efc or EfcAction.none()
    if horizon < max(efc.epc_delay, efc.dlc_delay):
        raise DataError("horizon must cover the EFC activation delays")
    response = step_response(model, dt, horizon)
    samples = superpose(response, dt, initial_imbalance, efc) * model.base_frequency
    return FrequencyTrace(
        dt=dt, horizon=horizon, samples=samples, base_frequency=model.base_frequency
    )


def nadir(trace: FrequencyTrace) -> Tuple[float, float]:
    """Largest absolute deviation in Hz and the earliest time it occurs."""
    magnitude = np.abs(trace.samples)
    index = int(np.argmax(magnitude))
    return float(magnitude[index]), index * trace.dt


def batch_nadirs(
    response: np.ndarray,
    dt: float,
    imbalances: np.ndarray,
    epc_powers: np.ndarray,
    dlc_powers: np.ndarray,
    epc_delay: float,
    dlc_delay: float,
    base_frequency: float,
    chunk: int = 256,
) -> np.ndarray:
    """Nadirs in Hz for many cases sharing one area model and delays."""
    basis = np.vstack(
        [response, _shifted(response, epc_delay, dt), _shifted(response, dlc_delay, dt)]
    )
    weights = np.column_stack([imbalances, epc_powers, dlc_powers]).astype(float)
    nadirs = np.empty(len(weights))
    for start in range(0, len(weights), chunk):
        block = weights[start : start + chunk] @ basis
        nadirs[start : start + chunk] = np.abs(block).max(axis=1)
    return nadirs * base_frequency


def quasi_steady_state(model: AreaDynamicModel, total_imbalance: float) -> float:
    """Post-transient deviation in Hz set by damping and droop."""
    gain = model.dc_gain()
    if gain <= 0:
        raise DataError("Area has zero damping and droop; no steady state exists")
    return total_imbalance / gain * model.base_frequency


def compare_efc_configurations(
    model: AreaDynamicModel,
    imbalance: float,
    epc_power: float,
    dlc_power: float,
    epc_delay: float = 0.2,
    dlc_delay: float = 0.6,
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
) -> Dict[str, Dict[str, float]]:
    """Nadir and steady deviation with no EFC, DLC only, EPC only and both."""
    configurations = {
        "none": EfcAction(epc_delay=epc_delay, dlc_delay=dlc_delay),
        "dlc": EfcAction(dlc_power=dlc_power, epc_delay=epc_delay, dlc_delay=dlc_delay),
        "epc": EfcAction(epc_power=epc_power, epc_delay=epc_delay, dlc_delay=dlc_delay),
        "both": EfcAction(
            epc_power=epc_power,
            dlc_power=dlc_power,
            epc_delay=epc_delay,
            dlc_delay=dlc_delay,
        ),
    }
    response = step_response(model, dt, horizon)
    results = {}
    for name, efc in configurations.items():
        samples = superpose(response, dt, imbalance, efc) * model.base_frequency
        magnitude = np.abs(samples)
        index = int(np.argmax(magnitude))
        results[name] = {
            "nadir_hz": float(magnitude[index]),
            "nadir_time_s": index * dt,
            "qss_hz": quasi_steady_state(
                model, imbalance + efc.epc_power + efc.dlc_power
            ),
        }
    return results


DEFAULT_DELAY_PAIRS = ((0.0, 0.0), (0.2, 0.6), (0.5, 1.0), (1.0, 1.5), (1.5, 2.0))


def delay_sensitivity(
    model: AreaDynamicModel,
    imbalance: float,
    efc: EfcAction,
    delay_pairs: Sequence[Tuple[float, float]] = DEFAULT_DELAY_PAIRS,
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
) -> List[Dict[str, float]]:
    """Nadir for each (tau_EPC, tau_DLC) pair with fixed control magnitudes."""
    response = step_response(model, dt, horizon)
    rows = []
    for epc_delay, dlc_delay in delay_pairs:
        delayed = efc.copy(update={"epc_delay": epc_delay, "dlc_delay": dlc_delay})
        samples = superpose(response, dt, imbalance, delayed) * model.base_frequency
        rows.append(
            {
                "epc_delay_s": epc_delay,
                "dlc_delay_s": dlc_delay,
                "nadir_hz": float(np.abs(samples).max()),
            }
        )
    return rows


def write_trace(trace: FrequencyTrace, path: Union[str, Path]) -> Path:
    """Write a trace as two-column CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"time_s": trace.times, "delta_f_hz": trace.samples})
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path


def read_trace(
    path: Union[str, Path], base_frequency: float = DEFAULT_BASE_FREQUENCY
) -> FrequencyTrace:
    """Read a two-column CSV trace."""
    frame = pd.read_csv(path)
    times = frame["time_s"].to_numpy()
    dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
    return FrequencyTrace(
        dt=dt,
        horizon=float(times[-1]),
        samples=frame["delta_f_hz"].to_numpy(),
        base_frequency=base_frequency,
    )
