"""Scenario generation, metrics, persistence and the command-line interface."""

from .scenario import (
    ConfigError,
    MetricsSummary,
    Scenario,
    ScenarioConfig,
    TrajectoryRecord,
    build_scenario,
    config_from_dict,
    config_to_dict,
    generate_scenario,
    run_scenario,
    run_trial,
    simulate_truth,
    summarize,
    with_case,
)
