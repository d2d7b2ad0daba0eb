"""Big-M embedding of secure regions and absolute-value linearization."""

import logging
import math
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pyomo.environ as pyo

from ..base.error import ModelError, NoSecureControlError
from .model import Expression, MilpModel, Var, VarKind

LOGGER = logging.getLogger(__name__)

DEFAULT_MARGIN = 1e-3
DEFAULT_INTERIOR = 1e-5


class RegionEmbedding(NamedTuple):
    """Selector binaries and the per-row constants used for them."""

    selectors: List[Var]
    big_m: List[List[float]]
    scales: List[List[float]]

    def active(self, values: Dict[str, float]) -> int:
        """Index of the selected region in a name to value mapping."""
        return int(np.argmax([values[var.local_name] for var in self.selectors]))


def _row_range(
    coeffs: np.ndarray, bias: float, box: Sequence[Tuple[float, float]]
) -> Tuple[float, float]:
    low = high = bias
    for coef, (lo, hi) in zip(coeffs, box):
        if coef > 0:
            low, high = low + coef * lo, high + coef * hi
        elif coef < 0:
            low, high = low + coef * hi, high + coef * lo
    return low, high


def embed_secure_regions(
    model: MilpModel,
    features: Sequence[Expression],
    regions,
    bounds: Optional[Sequence[Tuple[float, float]]] = None,
    prefix: str = "region",
    margin: float = DEFAULT_MARGIN,
    interior: float = DEFAULT_INTERIOR,
) -> RegionEmbedding:
    """Require the features to lie in one of the regions.

    Row r of region t reads ``s_r (A_r x + b_r) >= interior - M_r (1 - v_t)``
    where ``s_r`` scales the row to unit range over the feature box and
    ``M_r = max(0, interior - min_box s_r (A_r x + b_r)) + margin``; exactly one
    ``v_t`` is 1.
    """
    if not regions:
        raise ModelError("No secure region to embed for {}".format(prefix))
    if bounds is None:
        bounds = [model.bounds_of(feature) for feature in features]
    box = [(float(lo), float(hi)) for lo, hi in bounds]
    if len(box) != len(features):
        raise ModelError("Need one bound pair per feature expression")
    for position, (lo, hi) in enumerate(box):
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ModelError(
                "Feature {} of {} is unbounded; give explicit bounds".format(
                    position, prefix
                )
            )

    selectors, big_m, scales = [], [], []
    for number, region in enumerate(regions):
        selector = model.add_var("{}_v{}".format(prefix, number), VarKind.BINARY)
        selectors.append(selector)
        coeffs, bias = region.matrix(len(features))
        region_m, region_scales = [], []
        for row, (row_coeffs, row_bias) in enumerate(zip(coeffs, bias)):
            low, high = _row_range(row_coeffs, row_bias, box)
            if high - low <= 0.0:
                region_m.append(0.0)
                region_scales.append(0.0)
                if low < interior and not selector.fixed:
                    # constant row violated over the whole box
                    model.fix(selector, 0.0)
                continue
            scale = 1.0 / (high - low)
            m_row = max(0.0, interior - scale * low) + margin
            expr = float(scale * row_bias) + pyo.quicksum(
                float(scale * coef) * feature
                for coef, feature in zip(row_coeffs, features)
                if coef != 0.0
            )
            # expr + M (1 - v) >= interior
            model.add_constraint(
                expr - m_row * selector,
                ">=",
                interior - m_row,
                name="{}_t{}_r{}".format(prefix, number, row),
            )
            region_m.append(m_row)
            region_scales.append(scale)
        big_m.append(region_m)
        scales.append(region_scales)
    if all(var.fixed and var.value == 0.0 for var in selectors):
        raise NoSecureControlError(
            "No region of {} is reachable over the feature box".format(prefix)
        )
    model.add_constraint(pyo.quicksum(selectors), "=", 1.0, name="{}_one".format(prefix))
    if len(selectors) == 1 and not selectors[0].fixed:
        model.fix(selectors[0], 1.0)
    return RegionEmbedding(selectors, big_m, scales)


def add_abs_linearization(
    model: MilpModel, x: Expression, name: str
) -> Tuple[Var, Var]:
    """Split x into non-negative parts with ``x = plus - minus``.

    With a positive cost on ``plus + minus`` the sum equals ``|x|`` at an
    optimum.
    """
    low, high = model.bounds_of(x)
    plus = model.add_var("{}_pos".format(name), lower=0.0, upper=max(0.0, high))
    minus = model.add_var("{}_neg".format(name), lower=0.0, upper=max(0.0, -low))
    model.add_constraint(x - plus + minus, "=", 0.0, name="{}_abs".format(name))
    return plus, minus
