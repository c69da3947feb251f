"""Experiment driver: run configs, train/evaluate loop, aggregation, CLI."""

from .config import ConfigError, RunConfig, build_run_config, load_run_config, parse_config_text
from .runner import (
    CSV_COLUMNS,
    AggregateRow,
    MetricRecord,
    aggregate,
    aggregate_dir,
    best_during_training,
    evaluate_policy,
    read_run,
    run_experiment,
    write_report,
)

__all__ = [
    "AggregateRow", "CSV_COLUMNS", "ConfigError", "MetricRecord", "RunConfig", "aggregate",
    "aggregate_dir", "best_during_training", "build_run_config", "evaluate_policy",
    "load_run_config", "parse_config_text", "read_run", "run_experiment", "write_report",
]
