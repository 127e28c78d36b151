"""Scenario runners, comparison statistics and the command line interface."""

from .compare import compare_esd_to_brown, energy_distance, radial_ks, angular_ks, sample_field
from .config import ScenarioConfig, ConfigError
from .runners import (
    RunReport,
    run_assumption_audit,
    run_brown,
    run_convolve,
    run_jordan,
    run_local_law,
    run_local_window,
    run_lsv,
    run_simulate,
    run_single_ring,
)

__all__ = [
    "ScenarioConfig",
    "ConfigError",
    "RunReport",
    "compare_esd_to_brown",
    "energy_distance",
    "radial_ks",
    "angular_ks",
    "sample_field",
    "run_convolve",
    "run_brown",
    "run_simulate",
    "run_single_ring",
    "run_jordan",
    "run_local_law",
    "run_local_window",
    "run_lsv",
    "run_assumption_audit",
]
