"""Ensemble Kalman filtering for SIR epidemic models under different observation operators."""

from .diagnostics import consistency_gamma, mse, relative_error
from .dynamics import EpidemicState, ModelParams, burn_in, integrate, reset_incidence, sir_rhs, transmission_rate
from .filters import (
    Ensemble, FilterResult, GaussianBelief, NoiseSpec, Priors, enkf_analyze, enkf_predict,
    kf_step, parameter_drift, run_filter,
)
from .observation import NoiseModel, ObservationCase, corrupt, observe
from .synthesis import SyntheticDataset, generate_dataset

__version__ = "0.1.0"
