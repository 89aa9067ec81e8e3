"""Synthetic ground truth and noisy monthly case data."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import rng as rngs
from .dynamics import (
    DEFAULT_ATOL, DEFAULT_RTOL, ModelParams, burn_in, integrate, reset_incidence, seasonal,
)
from .errors import ConfigError
from .observation import NoiseModel, ObservationCase, corrupt, observe_array

MONTHS_PER_YEAR = 12
SAMPLES_PER_MONTH = 10


@dataclass
class SyntheticDataset:
    times: np.ndarray               # (M,) observation times, years
    observations: np.ndarray        # (M,)
    truth_times: np.ndarray         # dense grid incl. t=0 and every observation time
    truth_states: np.ndarray        # (K, 2) S, I on the dense grid
    truth_monthly_cases: np.ndarray  # (M,) new infections per interval
    gen_case: ObservationCase
    noise: NoiseModel
    params: ModelParams
    seed: int
    horizon_years: int
    burn_in_years: int = 0

    @property
    def initial_state(self) -> np.ndarray:
        return self.truth_states[0]

    @property
    def truth_at_obs(self) -> np.ndarray:
        """(M, 2) true S, I at the observation times."""
        return self.truth_states[SAMPLES_PER_MONTH::SAMPLES_PER_MONTH]

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "observations": self.observations.tolist(),
            "truth_times": self.truth_times.tolist(),
            "truth_states": self.truth_states.tolist(),
            "truth_monthly_cases": self.truth_monthly_cases.tolist(),
            "gen_case": int(self.gen_case),
            "noise": self.noise.to_dict(),
            "params": asdict(self.params),
            "seed": self.seed,
            "horizon_years": self.horizon_years,
            "burn_in_years": self.burn_in_years,
        }

    @classmethod
    def from_dict(cls, d) -> "SyntheticDataset":
        try:
            return cls(
                times=np.asarray(d["times"], dtype=float),
                observations=np.asarray(d["observations"], dtype=float),
                truth_times=np.asarray(d["truth_times"], dtype=float),
                truth_states=np.asarray(d["truth_states"], dtype=float),
                truth_monthly_cases=np.asarray(d["truth_monthly_cases"], dtype=float),
                gen_case=ObservationCase.parse(d["gen_case"]),
                noise=NoiseModel.from_dict(d["noise"]),
                params=ModelParams(**d["params"]),
                seed=int(d["seed"]),
                horizon_years=int(d["horizon_years"]),
                burn_in_years=int(d.get("burn_in_years", 0)),
            )
        except KeyError as exc:
            raise ConfigError(f"dataset is missing field {exc.args[0]!r}", "dataset") from None

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "SyntheticDataset":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "observation"])
            for t, y in zip(self.times, self.observations):
                w.writerow([f"{t:.17g}", f"{y:.17g}"])


def generate_dataset(
    params: ModelParams = ModelParams(),
    gen_case=ObservationCase.UNDER_REPORTED_INCIDENCE,
    noise: NoiseModel = NoiseModel(),
    horizon_years: int = 10,
    seed: int = 0,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> SyntheticDataset:
    """Burn the model in, restart the clock at ``t = 0`` and record one
    noisy observation at the end of every month."""
    gen_case = ObservationCase.parse(gen_case)
    if horizon_years < 1:
        raise ConfigError("must be >= 1", "horizon_years")
    warm = burn_in(params, rtol=rtol, atol=atol)
    beta = seasonal(params.b0, params.b1)
    data_rng = rngs.stream(seed, rngs.DATA)

    M = horizon_years * MONTHS_PER_YEAR
    times = np.arange(1, M + 1) / MONTHS_PER_YEAR
    dense_t = np.arange(M * SAMPLES_PER_MONTH + 1) / (MONTHS_PER_YEAR * SAMPLES_PER_MONTH)
    dense = np.zeros((len(dense_t), 2))
    monthly = np.zeros(M)
    expected = np.zeros(M)

    y = warm.state.as_array()
    dense[0] = y[:2]
    for j in range(M):
        y = reset_incidence(y)
        for k in range(SAMPLES_PER_MONTH):
            idx = j * SAMPLES_PER_MONTH + k
            y = integrate(y, params, dense_t[idx], dense_t[idx + 1], beta, rtol, atol)
            dense[idx + 1] = y[:2]
        monthly[j] = y[2]
        expected[j] = observe_array(gen_case, y, params.rho)
    observations = np.asarray(corrupt(expected, noise, data_rng), dtype=float)

    return SyntheticDataset(
        times=times, observations=observations, truth_times=dense_t, truth_states=dense,
        truth_monthly_cases=monthly, gen_case=gen_case, noise=noise, params=params,
        seed=int(seed), horizon_years=int(horizon_years), burn_in_years=warm.years,
    )
