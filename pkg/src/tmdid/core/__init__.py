"""
Core components for tmdid.

Provides the shared data models, the error hierarchy and CSV/config IO.
"""

from tmdid.core.models import (
    FilterDivergenceError,
    RecordFormatError,
    Sensor,
    SensorLayout,
    SensorType,
    SignalSeries,
    TmdidError,
    ValidationError,
)

__all__ = [
    "TmdidError",
    "ValidationError",
    "RecordFormatError",
    "FilterDivergenceError",
    "Sensor",
    "SensorLayout",
    "SensorType",
    "SignalSeries",
]
