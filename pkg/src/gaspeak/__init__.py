"""Intraday gas-fee analytics: estimation, peak-shaving scores, scheduling and a fee-market simulator."""

from .errors import ConfigurationError, DataError, EstimationError, GaspeakError, MetricError

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DataError",
    "EstimationError",
    "GaspeakError",
    "MetricError",
    "__version__",
]
