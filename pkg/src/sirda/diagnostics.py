"""Error scores and the innovation-based consistency ratio."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateInnovation, DomainError, LengthMismatch

NU_FLOOR = 1e-12


def mse(truth, estimate) -> float:
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise LengthMismatch(f"shapes differ: {truth.shape} vs {estimate.shape}")
    if truth.size == 0:
        raise LengthMismatch("empty series")
    return float(np.mean((truth - estimate) ** 2))


def relative_error(true_value, estimate) -> float:
    if true_value == 0:
        raise DomainError("relative error undefined for a zero true value")
    return abs(estimate - true_value) / abs(true_value)


@dataclass(frozen=True)
class InnovationRecord:
    nu: float
    phi_yy: float
    d_obs: float


@dataclass(frozen=True)
class Consistency:
    gamma: float
    used: int
    excluded: int


def consistency(records: Iterable[InnovationRecord]) -> Consistency:
    """Average of ``(d_obs + phi_yy) / nu`` over steps.

    Steps whose innovation statistic is below ``NU_FLOOR`` are left out and
    counted in ``excluded``.

    Raises
    ------
    DegenerateInnovation
        If every step is excluded.
    """
    ratios = []
    excluded = 0
    for r in records:
        if r.nu < NU_FLOOR:
            excluded += 1
            continue
        ratios.append((r.d_obs + r.phi_yy) / r.nu)
    if not ratios:
        raise DegenerateInnovation("no step has a nonzero innovation")
    return Consistency(float(np.mean(ratios)), len(ratios), excluded)


def consistency_gamma(records) -> float:
    return consistency(records).gamma


def innovation_records(result) -> list[InnovationRecord]:
    return [InnovationRecord(float(n), float(p), float(d))
            for n, p, d in zip(result.nu, result.phi_yy, result.d_obs)]


def innovation_statistic(y_pert, y_hat) -> float:
    """Mean squared difference between perturbed and predicted observations (1/N)."""
    diff = np.asarray(y_pert, dtype=float) - np.asarray(y_hat, dtype=float)
    return float(diff @ diff) / diff.size
