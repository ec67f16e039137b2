"""Config-driven parameter sweeps."""

from qkdfk.sweep.config import ConfigError, OptimizeSpec, SolverSettings, SweepConfig
from qkdfk.sweep.optimize import brent_minimize
from qkdfk.sweep.runner import ResultRow, SweepReport, SweepRunner, run_sweep

__all__ = [
    "ConfigError",
    "OptimizeSpec",
    "ResultRow",
    "SolverSettings",
    "SweepConfig",
    "SweepReport",
    "SweepRunner",
    "brent_minimize",
    "run_sweep",
]
