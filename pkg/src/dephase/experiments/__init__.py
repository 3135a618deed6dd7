"""Config-driven experiment runner and the ``dephase`` command-line tool."""

from .config import SCENARIO_KINDS, load_config, validate_config
from .runner import run_experiment, run_from_path, sweep_experiment

__all__ = [
    "SCENARIO_KINDS",
    "load_config",
    "validate_config",
    "run_experiment",
    "run_from_path",
    "sweep_experiment",
]
