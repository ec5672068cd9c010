"""Experiment configuration, batch runs, persistence and the command line."""

from .experiment import (
    CSV_HEADER,
    ExperimentConfig,
    QueryRow,
    RunRecord,
    RunSummary,
    Sandwich,
    SweepRow,
    emit_anytime_trace,
    load_config,
    parse_config_text,
    preprocess_system,
    read_query_csv,
    read_summary,
    read_sweep,
    read_trace,
    recompute_estimates,
    run_experiment,
    run_sandwich,
    sparsification_sweep,
    write_query_csv,
    write_sweep,
)

__all__ = [
    "CSV_HEADER",
    "ExperimentConfig",
    "QueryRow",
    "RunRecord",
    "RunSummary",
    "Sandwich",
    "SweepRow",
    "emit_anytime_trace",
    "load_config",
    "parse_config_text",
    "preprocess_system",
    "read_query_csv",
    "read_summary",
    "read_sweep",
    "read_trace",
    "recompute_estimates",
    "run_experiment",
    "run_sandwich",
    "sparsification_sweep",
    "write_query_csv",
    "write_sweep",
]
