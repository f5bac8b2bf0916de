"""Configuration, sweeps and the command line."""

from .config import (
    DEFAULT_P_GRID,
    OUT_ENV,
    Setting,
    SweepSpec,
    load_setting,
    setting_from_ini,
    setting_to_ini,
    sweep_from_ini,
    sweep_to_ini,
)
from .sweep import ComparisonRow, SweepResult, band, compare_point, judge, run_sweep

__all__ = [
    "DEFAULT_P_GRID",
    "OUT_ENV",
    "ComparisonRow",
    "Setting",
    "SweepResult",
    "SweepSpec",
    "band",
    "compare_point",
    "judge",
    "load_setting",
    "run_sweep",
    "setting_from_ini",
    "setting_to_ini",
    "sweep_from_ini",
    "sweep_to_ini",
]
