"""Geometry-based user scheduling on a clustered massive MIMO channel simulator."""

from .config import ConfigError, ScenarioConfig, load_config
from .drop import Drop, generate_drop
from .harness import PRESETS, SweepSpec, run_sweep, run_trial, run_trials

__version__ = "0.1.0"

__all__ = ["ConfigError", "Drop", "PRESETS", "ScenarioConfig", "SweepSpec", "generate_drop",
           "load_config", "run_sweep", "run_trial", "run_trials"]
