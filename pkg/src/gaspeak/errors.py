"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class GaspeakError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 2


class ConfigurationError(GaspeakError):
    """Bad configuration: missing columns, invalid flags, empty policy windows."""


class DataError(GaspeakError):
    """Input data violates a structural invariant."""


class EstimationError(GaspeakError):
    """An estimator cannot be evaluated on the supplied data."""


class MetricError(GaspeakError):
    """A firm-level metric is not computable (analysis-level failure)."""

    exit_code = 1
