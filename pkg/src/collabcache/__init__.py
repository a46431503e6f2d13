"""Collaborative video caching across small-cell base station pools."""

from .model import (
    CachePool,
    DelayParams,
    FractionalPlacement,
    Placement,
    VideoCatalog,
    average_delay_objective,
    copy_count_objective,
    fractional_objective,
    per_request_delay,
    reward_objective,
    validate_placement,
)
from .cca import cca_general, cca_greedy_only, cca_unit, ratio_threshold

__version__ = "0.1.0"

__all__ = [
    "CachePool",
    "DelayParams",
    "FractionalPlacement",
    "Placement",
    "VideoCatalog",
    "average_delay_objective",
    "copy_count_objective",
    "fractional_objective",
    "per_request_delay",
    "reward_objective",
    "validate_placement",
    "cca_general",
    "cca_greedy_only",
    "cca_unit",
    "ratio_threshold",
]
