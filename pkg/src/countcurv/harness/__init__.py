"""Experiment harness: run configs, experiments, rate fits and reports."""

from .config import RunConfig, load_config, parse_config
from .experiments import (
    run_bump_experiment,
    run_flatness_suite,
    run_hypothesis_audit,
    run_sectional_experiment,
)
from .fit import RateFit

__all__ = ["RateFit", "RunConfig", "load_config", "parse_config", "run_bump_experiment",
           "run_flatness_suite", "run_hypothesis_audit", "run_sectional_experiment"]
