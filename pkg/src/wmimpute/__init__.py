"""Imputation of missing hourly water-meter consumption over 24-hour day vectors."""

__version__ = "0.1.0"

from .core import DayMatrix, HourlySeries, NormStats, RawReading, SplitIndex, missing_fraction, validate_day_matrix
from .errors import PipelineError

__all__ = [
    "DayMatrix", "HourlySeries", "NormStats", "PipelineError", "RawReading", "SplitIndex",
    "missing_fraction", "validate_day_matrix",
]
