"""Observation operators for monthly case data and the noise models used to corrupt them."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dynamics import C, I, EpidemicState, ModelParams
from .errors import AccumulatorUnset, ConfigError, DomainError


class ObservationCase(enum.IntEnum):
    PREVALENCE = 1
    UNDER_REPORTED_PREVALENCE = 2
    INCIDENCE = 3
    UNDER_REPORTED_INCIDENCE = 4

    @property
    def uses_incidence(self) -> bool:
        return self in (ObservationCase.INCIDENCE, ObservationCase.UNDER_REPORTED_INCIDENCE)

    @property
    def uses_rho(self) -> bool:
        return self in (
            ObservationCase.UNDER_REPORTED_PREVALENCE,
            ObservationCase.UNDER_REPORTED_INCIDENCE,
        )

    @classmethod
    def parse(cls, value) -> "ObservationCase":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            key = value.strip().upper().replace("-", "_")
            if key in cls.__members__:
                return cls[key]
            value = value.strip()
        try:
            return cls(int(value))
        except (TypeError, ValueError):
            raise ConfigError(f"unknown observation case {value!r}", "case") from None


def observe_array(case: ObservationCase, y, rho=1.0):
    """Expected observation for a batch of ``(s, i, c)`` states.

    ``rho`` may be a scalar or one value per member. Incidence cases read
    the accumulator, so the caller must have reset it at the interval start.
    """
    y = np.asarray(y, dtype=float)
    base = y[..., C] if case.uses_incidence else y[..., I]
    return rho * base if case.uses_rho else base.copy()


def observe(case: ObservationCase, state: EpidemicState, params: ModelParams) -> float:
    """Expected datum for a single state.

    Raises
    ------
    AccumulatorUnset
        For incidence cases when the state's accumulator was never reset.
    """
    case = ObservationCase.parse(case)
    if case.uses_incidence and not state.accumulating:
        raise AccumulatorUnset(
            f"case {int(case)} needs an accumulator reset at the interval start"
        )
    return float(observe_array(case, state.as_array(), params.rho))


@dataclass(frozen=True)
class NoiseModel:
    """Observation error: ``additive`` adds N(0, sigma^2); ``multiplicative``
    multiplies by exp(N(0, sigma^2)), i.e. sigma is on the log scale."""

    kind: str = "additive"
    sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in ("additive", "multiplicative"):
            raise ConfigError(f"unknown noise kind {self.kind!r}", "noise.kind")
        if not self.sigma >= 0:
            raise ConfigError("must be >= 0", "noise.sigma")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d) -> "NoiseModel":
        return cls(kind=d.get("kind", "additive"), sigma=float(d.get("sigma", 0.1)))


def corrupt(value, noise: NoiseModel, rng: np.random.Generator):
    """Draw a noisy observation around ``value`` (scalar or array).

    Additive noise can produce negative observations; they are kept.
    """
    value = np.asarray(value, dtype=float)
    if noise.kind == "additive":
        out = value + noise.sigma * rng.standard_normal(value.shape)
    else:
        if np.any(value <= 0):
            raise DomainError("multiplicative noise needs strictly positive values")
        out = value * np.exp(noise.sigma * rng.standard_normal(value.shape))
    return float(out) if out.ndim == 0 else out
