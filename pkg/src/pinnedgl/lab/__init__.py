"""Sweep configuration, orchestration and rate fitting."""

from .config import EXPERIMENTS, DeltaRule, SweepConfig, config_from_dict, load_config, parse_delta_rule
from .rates import RateFit, fit_rate
from .sweep import COLUMNS, FitResult, SweepResult, build_pinning, read_csv, run_sweep, write_csv

__all__ = [
    "EXPERIMENTS",
    "DeltaRule",
    "SweepConfig",
    "config_from_dict",
    "load_config",
    "parse_delta_rule",
    "RateFit",
    "fit_rate",
    "COLUMNS",
    "FitResult",
    "SweepResult",
    "build_pinning",
    "read_csv",
    "run_sweep",
    "write_csv",
]
