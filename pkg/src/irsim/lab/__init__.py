"""Experiment harness: configs, replicated runs, metrics and CSV output."""

from irsim.lab.config import ConfigError, ExperimentConfig, load_config
from irsim.lab.experiment import lambda_grid, run_experiment, run_replication, sweep_lambda
from irsim.lab.metrics import (
    ConvergenceReport, TimeSeriesRow, cluster_stats, detect_steady, init_random_grid,
)
