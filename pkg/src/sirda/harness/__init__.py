"""Experiment harness: scenario runs, noise sweeps, plot data and the CLI."""

from .config import GenerationSpec, ScenarioConfig, load_config
from .plotdata import emit_plot_data
from .runner import (
    RunArtifact, SweepArtifact, compare_cases, load_artifact, run_scenario, sweep_sigma_d,
)
