"""Scenario configuration: validation, JSON round trip and hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from ..dynamics import ModelParams
from ..errors import ConfigError
from ..filters import MODES, NoiseSpec, Priors
from ..observation import NoiseModel, ObservationCase


@dataclass(frozen=True)
class GenerationSpec:
    """How to synthesise the dataset when no dataset file is given."""

    seed: int = 0
    horizon_years: int = 10
    gen_case: int = 4
    noise_kind: str = "additive"
    noise_sigma: float = 0.1

    def __post_init__(self):
        if self.horizon_years < 1:
            raise ConfigError("must be >= 1", "generation.horizon_years")
        ObservationCase.parse(self.gen_case)
        self.noise_model()

    def noise_model(self) -> NoiseModel:
        try:
            return NoiseModel(self.noise_kind, float(self.noise_sigma))
        except ConfigError as exc:
            raise ConfigError(str(exc), "generation.noise") from None


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str = "state"
    case: int = 4
    n_ensemble: int = 100
    sigma_c: float = 0.2
    sigma_d: float = 1.0
    sigma_e: float = 45.0
    priors: Priors = field(default_factory=Priors)
    estimate: tuple = ("b0", "b1")
    seed: int = 0
    replicates: int = 1
    dataset: Optional[str] = None
    generation: GenerationSpec = field(default_factory=GenerationSpec)
    params: ModelParams = field(default_factory=ModelParams)
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"must be one of {MODES}, got {self.mode!r}", "mode")
        object.__setattr__(self, "case", int(ObservationCase.parse(self.case)))
        if not (isinstance(self.n_ensemble, int) and self.n_ensemble >= 2):
            raise ConfigError("must be an integer >= 2", "n_ensemble")
        if not self.sigma_c >= 0:
            raise ConfigError("must be >= 0", "sigma_c")
        if not self.sigma_d > 0:
            raise ConfigError("must be > 0", "sigma_d")
        if not self.sigma_e >= 0:
            raise ConfigError("must be >= 0", "sigma_e")
        if not (isinstance(self.replicates, int) and self.replicates >= 1):
            raise ConfigError("must be an integer >= 1", "replicates")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError("must be an integer >= 1", "workers")
        est = tuple(self.estimate)
        bad = [e for e in est if e not in ("b0", "b1")]
        if bad:
            raise ConfigError(f"unknown parameter(s) {bad}", "estimate")
        object.__setattr__(self, "estimate", est)

    @property
    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.sigma_c, self.sigma_d, self.sigma_e)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "case": self.case,
            "n_ensemble": self.n_ensemble,
            "sigma_c": self.sigma_c,
            "sigma_d": self.sigma_d,
            "sigma_e": self.sigma_e,
            "priors": self.priors.to_dict(),
            "estimate": list(self.estimate),
            "seed": self.seed,
            "replicates": self.replicates,
            "dataset": self.dataset,
            "generation": asdict(self.generation),
            "params": asdict(self.params),
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown field(s) {unknown}", unknown[0])
        kw = dict(d)
        if "priors" in kw:
            kw["priors"] = _sub(Priors, kw["priors"], "priors",
                                convert=lambda v: {k: tuple(x) for k, x in v.items()})
        if "generation" in kw:
            kw["generation"] = _sub(GenerationSpec, kw["generation"], "generation")
        if "params" in kw:
            kw["params"] = _sub(ModelParams, kw["params"], "params")
        if "estimate" in kw:
            kw["estimate"] = tuple(kw["estimate"])
        for name, typ in (("n_ensemble", int), ("seed", int), ("replicates", int),
                          ("workers", int), ("sigma_c", float), ("sigma_d", float),
                          ("sigma_e", float)):
            if name in kw:
                kw[name] = _coerce(kw[name], typ, name)
        return cls(**kw)

    def hash(self) -> str:
        """Digest of everything that determines the results (not ``workers``)."""
        d = self.to_dict()
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _coerce(value, typ, path):
    if typ is int:
        if isinstance(value, bool) or not float(value).is_integer():
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return int(value)
    try:
        return typ(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected {typ.__name__}, got {value!r}", path) from None


def _sub(cls, value, path, convert=None):
    if not isinstance(value, dict):
        raise ConfigError("expected an object", path)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(value) - names)
    if unknown:
        raise ConfigError(f"unknown field(s) {unknown}", f"{path}.{unknown[0]}")
    if convert is not None:
        try:
            value = convert(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), path) from None
    try:
        return cls(**value)
    except ConfigError as exc:
        if exc.path and not exc.path.startswith(path):
            raise ConfigError(str(exc).split(": ", 1)[-1], f"{path}.{exc.path}") from None
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None


def load_config(path, overrides: Optional[dict] = None) -> ScenarioConfig:
    base = {}
    if path is not None:
        try:
            base = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", "config") from None
    base.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ScenarioConfig.from_dict(base)
