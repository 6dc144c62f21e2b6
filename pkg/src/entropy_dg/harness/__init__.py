"""Configuration, experiment drivers, plots and the ``entropy-dg`` command line."""

from .config import EXPERIMENTS, ExperimentSpec, emit_config, load_config, parse_config
from .experiments import ExperimentResult, run_experiment
from .plots import emit_plots

__all__ = [
    "EXPERIMENTS",
    "ExperimentSpec",
    "ExperimentResult",
    "emit_config",
    "emit_plots",
    "load_config",
    "parse_config",
    "run_experiment",
]
