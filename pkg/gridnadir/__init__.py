"""Emergency-aware, frequency-constrained HVDC planning."""

__version__ = "0.1.0"
