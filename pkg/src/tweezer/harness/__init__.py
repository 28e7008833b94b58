from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .sweeps import (SweepResult, run_adiabatic_sweep, run_spectroscopy_sweep,
                     run_truncation_sweep, synth_experiment)

__all__ = [
    "ConfigError", "ExperimentConfig", "load_config", "parse_config", "SweepResult",
    "run_adiabatic_sweep", "run_spectroscopy_sweep", "run_truncation_sweep",
    "synth_experiment",
]
