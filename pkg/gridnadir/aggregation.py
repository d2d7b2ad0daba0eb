"""Equivalent aggregated parameters and the learning feature vector."""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field
from typing_extensions import Annotated

from .base import FrozenRecord
from .definition import FEATURE_ORDER
from .sfr import AreaDynamicModel, EfcAction, HydroUnitDyn, StorageUnitDyn, ThermalUnitDyn
from .valid import FiniteFloat


class EquivalentParams(FrozenRecord):
    """Frequency-support capability of one area."""

    inertia: Annotated[float, Field(description="H_a in MW*s", ge=0)]
    d_fast: Annotated[float, Field(description="D_fast,a in MW per p.u.", ge=0)]
    d_slow: Annotated[float, Field(description="D_slow,a in MW per p.u.", ge=0)]

    def as_array(self) -> np.ndarray:
        """(H, D_fast, D_slow) as an array."""
        return np.array([self.inertia, self.d_fast, self.d_slow])


class FeatureVector(FrozenRecord):
    """Input of the frequency security rules, in the frozen feature order."""

    h: FiniteFloat
    d_fast: FiniteFloat
    d_slow: FiniteFloat
    dp_epc: Annotated[FiniteFloat, Field(description="Net EPC injection, MW")]
    dp_dlc: Annotated[float, Field(description="DLC power, MW", ge=0)]
    dp_d: Annotated[FiniteFloat, Field(description="Initial imbalance, MW")]

    def as_array(self) -> np.ndarray:
        """Entries in FEATURE_ORDER."""
        return np.array([getattr(self, name) for name in FEATURE_ORDER])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "FeatureVector":
        """Build from entries in FEATURE_ORDER."""
        if len(values) != len(FEATURE_ORDER):
            raise ValueError("feature vector needs {} entries".format(len(FEATURE_ORDER)))
        return cls(**dict(zip(FEATURE_ORDER, values)))


def equivalent_params(
    thermal: Sequence[ThermalUnitDyn],
    hydro: Sequence[HydroUnitDyn],
    storage: Sequence[StorageUnitDyn],
    load_damping: float,
    commitments: Optional[Sequence[bool]] = None,
    fixed_inertia: float = 0.0,
) -> EquivalentParams:
    """Aggregate unit parameters; commitments override the units' own flags."""
    if commitments is None:
        commitments = [unit.committed for unit in thermal]
    if len(commitments) != len(thermal):
        raise ValueError("one commitment per thermal unit is required")
    inertia = fixed_inertia
    d_fast = load_damping
    d_slow = 0.0
    for unit, on in zip(thermal, commitments):
        if not on:
            continue
        inertia += unit.inertia_const * unit.p_max
        d_fast += unit.hp_fraction * unit.p_max / unit.droop
        d_slow += (1.0 - unit.hp_fraction) * unit.p_max / unit.droop
    for unit in hydro:
        inertia += unit.inertia_const * unit.p_max
        d_fast += unit.p_max / unit.perm_droop
    for unit in storage:
        d_fast += unit.p_max / unit.droop
    return EquivalentParams(inertia=inertia, d_fast=d_fast, d_slow=d_slow)


def area_params(model: AreaDynamicModel) -> EquivalentParams:
    """Aggregate an area model as committed."""
    return equivalent_params(
        model.thermal,
        model.hydro,
        model.storage,
        model.load_damping,
        fixed_inertia=model.fixed_inertia,
    )


def commitment_coefficients(
    thermal: Sequence[ThermalUnitDyn],
) -> List[Tuple[float, float, float]]:
    """Per thermal unit (H, D_fast, D_slow) contribution when committed."""
    return [
        (
            unit.inertia_const * unit.p_max,
            unit.hp_fraction * unit.p_max / unit.droop,
            (1.0 - unit.hp_fraction) * unit.p_max / unit.droop,
        )
        for unit in thermal
    ]


def feature_vector(eq: EquivalentParams, efc: EfcAction, imbalance: float) -> FeatureVector:
    """Assemble X_a = [H, D_fast, D_slow, dP_EPC, dP_DLC, dP_D]."""
    return FeatureVector(
        h=eq.inertia,
        d_fast=eq.d_fast,
        d_slow=eq.d_slow,
        dp_epc=efc.epc_power,
        dp_dlc=efc.dlc_power,
        dp_d=imbalance,
    )
