"""Validation helpers."""

import math

import numpy as np


class FiniteFloat(float):
    """Float field rejecting NaN and infinities."""

    @classmethod
    def __get_validators__(cls):
        """Yield validators."""
        yield cls.validate

    @classmethod
    def validate(cls, value):
        """Validate the value is a finite number."""
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("value must be finite, got {}".format(value))
        return value


class Fraction(float):
    """Float field constrained to the closed interval [0, 1]."""

    @classmethod
    def __get_validators__(cls):
        """Yield validators."""
        yield cls.validate

    @classmethod
    def validate(cls, value):
        """Validate the value lies in [0, 1]."""
        value = FiniteFloat.validate(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError("fraction must lie in [0, 1], got {}".format(value))
        return value


class FloatArray(np.ndarray):
    """One- or two-dimensional float array field, serialized as nested lists."""

    @classmethod
    def __get_validators__(cls):
        """Yield validators."""
        yield cls.validate

    @classmethod
    def validate(cls, value):
        """Coerce the value to a finite float array."""
        array = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(array)):
            raise ValueError("array entries must be finite")
        return array
