"""Scenario execution, replicate orchestration and persisted run artifacts."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import rng as rngs
from ..diagnostics import consistency, innovation_records, mse, relative_error
from ..dynamics import transmission_rate
from ..errors import ConfigError, DegenerateInnovation
from ..filters import FilterResult, run_filter
from ..observation import ObservationCase
from ..synthesis import SyntheticDataset, generate_dataset
from .config import GenerationSpec, ScenarioConfig

log = logging.getLogger(__name__)

SWEEP_DEFAULT = (1.0, 5.0, 10.0, 15.0, 20.0, 25.0)
METRICS = ("mse_s", "mse_i", "mse_cases", "gamma", "rel_err_b0", "rel_err_b1",
           "mse_beta", "beta_coverage")


# --------------------------------------------------------------------------
# datasets


@lru_cache(maxsize=8)
def _generated(params, gen: GenerationSpec) -> SyntheticDataset:
    return generate_dataset(params, gen.gen_case, gen.noise_model(), gen.horizon_years, gen.seed)


def resolve_dataset(config: ScenarioConfig) -> SyntheticDataset:
    if config.dataset:
        try:
            return SyntheticDataset.load(config.dataset)
        except OSError as exc:
            raise ConfigError(f"cannot read dataset: {exc}", "dataset") from None
    return _generated(config.params, config.generation)


# --------------------------------------------------------------------------
# scoring


def summarize(result: FilterResult, dataset: SyntheticDataset) -> dict:
    """Scores of one filtering run against the dataset's ground truth."""
    truth = dataset.truth_at_obs
    out = {m: None for m in METRICS}
    out["seed"] = result.seed
    out["mse_s"] = mse(truth[:, 0], result.series("S"))
    out["mse_i"] = mse(truth[:, 1], result.series("I"))
    if ObservationCase(result.case).uses_incidence:
        out["mse_cases"] = mse(dataset.truth_monthly_cases, result.series("C"))
    try:
        c = consistency(innovation_records(result))
        out["gamma"], out["gamma_excluded"] = c.gamma, c.excluded
    except DegenerateInnovation:
        out["gamma_excluded"] = len(result.nu)
    p = dataset.params
    for lab in ("b0", "b1"):
        if lab in result.labels:
            out[f"rel_err_{lab}"] = relative_error(getattr(p, lab), float(result.series(lab)[-1]))
    if "beta" in result.labels:
        true_beta = transmission_rate(result.times, p.b0, p.b1)
        est, sd = result.series("beta"), result.std("beta")
        out["mse_beta"] = mse(true_beta, est)
        out["beta_coverage"] = float(np.mean(np.abs(true_beta - est) <= 2 * sd))
    return out


def aggregate(summaries: Sequence[dict]) -> dict:
    agg = {}
    for m in METRICS:
        vals = np.array([s[m] for s in summaries if s.get(m) is not None], dtype=float)
        if vals.size == 0:
            continue
        agg[m] = {"mean": float(vals.mean()), "median": float(np.median(vals)),
                  "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                  "min": float(vals.min()), "max": float(vals.max()), "n": int(vals.size)}
    return agg


# --------------------------------------------------------------------------
# runs


def replicate_seeds(config: ScenarioConfig) -> list[int]:
    if config.replicates == 1:
        return [config.seed]
    return [rngs.derive_seed(config.seed, k) for k in range(config.replicates)]


def _one(args):
    config, dataset, seed = args
    return run_filter(
        config.mode, config.case, dataset, config.params, config.priors, config.noise,
        config.n_ensemble, seed, estimate=config.estimate,
    )


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


@dataclass
class RunArtifact:
    config: ScenarioConfig
    dataset: SyntheticDataset
    results: list
    summaries: list
    aggregate: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return self.config.hash()

    def to_dict(self) -> dict:
        return {
            "kind": "run",
            "config": self.config.to_dict(),
            "config_hash": self.config_hash,
            "seeds": [r.seed for r in self.results],
            "summaries": self.summaries,
            "aggregate": self.aggregate,
            "dataset": self.dataset.to_dict(),
            "results": [r.to_dict() for r in self.results],
        }

    @classmethod
    def from_dict(cls, d) -> "RunArtifact":
        return cls(
            config=ScenarioConfig.from_dict(d["config"]),
            dataset=SyntheticDataset.from_dict(d["dataset"]),
            results=[FilterResult.from_dict(r) for r in d["results"]],
            summaries=d["summaries"],
            aggregate=d["aggregate"],
        )

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "run.json").write_text(json.dumps(self.to_dict()))
        summary = {"config_hash": self.config_hash, "config": self.config.to_dict(),
                   "summaries": self.summaries, "aggregate": self.aggregate}
        (out / "summary.json").write_text(json.dumps(summary, indent=2))
        for k, res in enumerate(self.results):
            write_series_csv(out / f"series_{k:02d}.csv", res, self.dataset, self.config_hash)
        return out


def load_artifact(path):
    """Load a run or sweep artifact from its JSON file or directory."""
    p = Path(path)
    if p.is_dir():
        p = p / "run.json" if (p / "run.json").exists() else p / "sweep.json"
    d = json.loads(p.read_text())
    if d.get("kind") == "sweep":
        return SweepArtifact.from_dict(d)
    return RunArtifact.from_dict(d)


def run_scenario(config: ScenarioConfig, out_dir=None, dataset: Optional[SyntheticDataset] = None) -> RunArtifact:
    """Run every replicate of a scenario and score it.

    Replicate ``k`` uses the seed derived from ``(config.seed, k)``; with a
    single replicate the base seed is used as is.
    """
    dataset = dataset if dataset is not None else resolve_dataset(config)
    seeds = replicate_seeds(config)
    log.info("running %s case %d with %d replicate(s)", config.mode, config.case, len(seeds))
    results = _map(_one, [(config, dataset, s) for s in seeds], config.workers)
    summaries = [summarize(r, dataset) for r in results]
    art = RunArtifact(config, dataset, results, summaries, aggregate(summaries))
    if out_dir is not None:
        art.save(out_dir)
    return art


def compare_cases(config: ScenarioConfig, cases=(1, 2, 3, 4), out_dir=None) -> dict:
    """Run one mode under several observation cases on a single dataset."""
    dataset = resolve_dataset(config)
    out = {}
    for c in cases:
        cfg = config.with_(case=int(c))
        sub = None if out_dir is None else Path(out_dir) / f"case{int(c)}"
        out[int(c)] = run_scenario(cfg, sub, dataset=dataset)
    if out_dir is not None:
        rows = [{"case": c, **{m: a.aggregate.get(m, {}).get("median") for m in ("mse_s", "mse_i", "gamma")}}
                for c, a in out.items()]
        Path(out_dir, "compare.json").write_text(json.dumps(rows, indent=2))
    return out


# --------------------------------------------------------------------------
# sigma_D sweeps


@dataclass
class SweepArtifact:
    base: ScenarioConfig
    values: list
    cases: list
    rows: list          # one dict per (case, sigma_d, replicate)

    def table(self, metric) -> list[dict]:
        """Mean and median of ``metric`` for each (case, sigma_d)."""
        out = []
        for c in self.cases:
            for v in self.values:
                vals = [r[metric] for r in self.rows
                        if r["case"] == c and r["sigma_d"] == v and r.get(metric) is not None]
                if vals:
                    out.append({"case": c, "sigma_d": v, "mean": float(np.mean(vals)),
                                "median": float(np.median(vals)), "n": len(vals)})
        return out

    def to_dict(self) -> dict:
        return {"kind": "sweep", "base": self.base.to_dict(), "config_hash": self.base.hash(),
                "values": self.values, "cases": self.cases, "rows": self.rows}

    @classmethod
    def from_dict(cls, d) -> "SweepArtifact":
        return cls(ScenarioConfig.from_dict(d["base"]), d["values"], d["cases"], d["rows"])

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_text(json.dumps(self.to_dict()))
        h = self.base.hash()
        for metric, name in (("mse_s", "mse_s"), ("mse_i", "mse_i"), ("gamma", "gamma")):
            with open(out / f"{name}_vs_sigma_d.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["case", "sigma_d", "mean", "median", "n", "config_hash"])
                for row in self.table(metric):
                    w.writerow([row["case"], _f(row["sigma_d"]), _f(row["mean"]),
                                _f(row["median"]), row["n"], h])
        return out


def _sweep_job(args):
    cfg, dataset, seed = args
    res = _one((cfg, dataset, seed))
    return summarize(res, dataset)


def sweep_sigma_d(base: ScenarioConfig, values=SWEEP_DEFAULT, replicates=None,
                  cases=None, out_dir=None) -> SweepArtifact:
    """Repeat a scenario over a grid of observation-noise levels.

    Every (case, sigma_d) cell runs ``replicates`` filters on the same
    dataset; replicate seeds are shared across cells.
    """
    values = [float(v) for v in values]
    if not values or any(v <= 0 for v in values):
        raise ConfigError("sigma_d values must be nonempty and positive", "values")
    if replicates is not None:
        base = base.with_(replicates=int(replicates))
    cases = [int(ObservationCase.parse(c)) for c in (cases or [base.case])]
    dataset = resolve_dataset(base)
    seeds = replicate_seeds(base)
    jobs, keys = [], []
    for c in cases:
        for v in values:
            cfg = base.with_(case=c, sigma_d=v)
            for k, s in enumerate(seeds):
                jobs.append((cfg, dataset, s))
                keys.append((c, v, k))
    summaries = _map(_sweep_job, jobs, base.workers)
    rows = [{"case": c, "sigma_d": v, "replicate": k, **s} for (c, v, k), s in zip(keys, summaries)]
    art = SweepArtifact(base, values, cases, rows)
    if out_dir is not None:
        art.save(out_dir)
    return art


# --------------------------------------------------------------------------
# csv


def _f(x) -> str:
    return "" if x is None else f"{float(x):.17g}"


def write_series_csv(path, result: FilterResult, dataset: SyntheticDataset, config_hash=""):
    """Per-step posterior means and standard deviations of every component."""
    truth = dataset.truth_at_obs
    header = ["time", "observation", "truth_S", "truth_I", "truth_cases"]
    for lab in result.labels:
        header += [f"mean_{lab}", f"std_{lab}"]
    header += ["cases_mean", "cases_std", "nu", "phi_yy", "d_obs", "config_hash", "seed"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j, t in enumerate(result.times):
            row = [t, dataset.observations[j], truth[j, 0], truth[j, 1],
                   dataset.truth_monthly_cases[j]]
            for k in range(len(result.labels)):
                row += [result.mean[j, k], np.sqrt(max(result.cov[j, k, k], 0.0))]
            row += [result.cases_mean[j], result.cases_std[j], result.nu[j],
                    result.phi_yy[j], result.d_obs[j]]
            w.writerow([_f(x) for x in row] + [config_hash, result.seed])
