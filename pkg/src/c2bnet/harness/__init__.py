"""Experiment configs, sweeps, comparisons, file formats and the command line."""

from .config import ConfigError, ExperimentConfig, default_config, load_config
from .experiments import (
    Comparison,
    PowerLawFit,
    SweepRecord,
    SweepResult,
    compare_finetune,
    estimate_projection_residual,
    fit_power_law,
    run_sweep,
)
from .io import FormatError, load_dataset, load_model, save_dataset, save_model

__all__ = [
    "Comparison",
    "ConfigError",
    "ExperimentConfig",
    "FormatError",
    "PowerLawFit",
    "SweepRecord",
    "SweepResult",
    "compare_finetune",
    "default_config",
    "estimate_projection_residual",
    "fit_power_law",
    "load_config",
    "load_dataset",
    "load_model",
    "run_sweep",
    "save_dataset",
    "save_model",
]
