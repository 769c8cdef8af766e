"""
Unscented Kalman filter and the adaptive identification layer.
"""

from tmdid.estimation.adaptive import (
    AdaptationConfig,
    DetectionLog,
    IdentificationResult,
    run_identification,
)
from tmdid.estimation.model import StructuralFilterModel
from tmdid.estimation.ukf import AugmentedState, FilterConfig, ukf_step

__all__ = [
    "AdaptationConfig",
    "DetectionLog",
    "IdentificationResult",
    "run_identification",
    "StructuralFilterModel",
    "AugmentedState",
    "FilterConfig",
    "ukf_step",
]
