"""SIR forward model with seasonal transmission.

The ODE state is carried as an array whose last axis is ``(s, i, c)``:
susceptible count, infectious count and the number of new infections
accumulated since the last reset.  Leading axes are batch axes, so a whole
ensemble can be integrated in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, NonConvergence, StepSizeUnderflow

S, I, C = 0, 1, 2

DEFAULT_RTOL = 1e-6
DEFAULT_ATOL = 1e-8


@dataclass(frozen=True)
class ModelParams:
    """Epidemiological parameters. Rates are per year."""

    n_pop: float = 90_000.0
    b0: float = 1800.0
    b1: float = 0.08
    lam: float = 100.0
    m: float = 0.02
    rho: float = 0.7

    def __post_init__(self):
        if not self.n_pop > 0:
            raise ConfigError("must be > 0", "params.n_pop")
        if not self.b0 > 0:
            raise ConfigError("must be > 0", "params.b0")
        if not 0 <= self.b1 < 1:
            raise ConfigError("must lie in [0, 1)", "params.b1")
        if not self.lam > 0:
            raise ConfigError("must be > 0", "params.lam")
        if not self.m >= 0:
            raise ConfigError("must be >= 0", "params.m")
        if not 0 < self.rho <= 1:
            raise ConfigError("must lie in (0, 1]", "params.rho")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def endemic_equilibrium(self) -> tuple[float, float]:
        """Fixed point of the unforced (``b1 = 0``) system."""
        s_star = self.n_pop * (self.lam + self.m) / self.b0
        i_star = self.m * (self.n_pop - s_star) / (self.lam + self.m)
        return s_star, i_star


@dataclass(frozen=True)
class EpidemicState:
    s: float
    i: float
    c: float = 0.0
    # set by reset_incidence; guards incidence reads on stale accumulators
    accumulating: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.i, self.c], dtype=float)

    @classmethod
    def from_array(cls, y, accumulating=False) -> "EpidemicState":
        return cls(float(y[S]), float(y[I]), float(y[C]), accumulating)

    def recovered(self, n_pop: float) -> float:
        return n_pop - self.s - self.i


def reset_incidence(state):
    """Zero the incidence accumulator, leaving ``s`` and ``i`` untouched."""
    if isinstance(state, EpidemicState):
        return replace(state, c=0.0, accumulating=True)
    out = np.array(state, dtype=float, copy=True)
    out[..., C] = 0.0
    return out


def transmission_rate(t, b0, b1):
    """Seasonal transmission ``b0 * (1 + b1 * cos(2 pi t))``, ``t`` in years."""
    return b0 * (1.0 + b1 * np.cos(2.0 * np.pi * t))


def seasonal(b0, b1) -> Callable:
    """Beta source following the seasonal form; ``b0``/``b1`` may be per-member arrays."""
    b0 = np.asarray(b0, dtype=float)
    b1 = np.asarray(b1, dtype=float)

    def beta(t):
        return transmission_rate(t, b0, b1)

    return beta


def constant(value) -> Callable:
    """Beta source held fixed over the integration window."""
    value = np.asarray(value, dtype=float)
    return lambda t: value


def sir_rhs(t, y, params: ModelParams, beta: Callable):
    y = np.asarray(y, dtype=float)
    s, i = y[..., S], y[..., I]
    n = params.n_pop
    infection = beta(t) * i * s / n
    out = np.empty(np.broadcast_shapes(y.shape, np.shape(infection) + (3,)))
    out[..., S] = params.m * n - infection - params.m * s
    out[..., I] = infection - (params.lam + params.m) * i
    out[..., C] = infection
    return out


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4


def integrate(
    state,
    params: ModelParams,
    t0: float,
    t1: float,
    beta: Callable,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    *,
    h_min: Optional[float] = None,
    max_steps: int = 200_000,
    callback: Optional[Callable] = None,
):
    """Integrate the SIR system from ``t0`` to ``t1``.

    Uses an adaptive Dormand-Prince 4(5) pair. When ``state`` is batched,
    every member shares the step sequence and the error norm is the worst
    member's, so results for a member depend on the batch it travels with.

    Parameters
    ----------
    state : EpidemicState or array_like, shape (..., 3)
    beta : callable
        ``beta(t)`` returning a scalar or an array broadcastable to the batch.
    callback : callable, optional
        Called as ``callback(t, y)`` after every accepted step.

    Returns
    -------
    Same type as ``state``, evaluated at ``t1``.

    Raises
    ------
    StepSizeUnderflow
        If the local error cannot be controlled with a step above ``h_min``.
    """
    if isinstance(state, EpidemicState):
        y_end = integrate(
            state.as_array(), params, t0, t1, beta, rtol, atol,
            h_min=h_min, max_steps=max_steps, callback=callback,
        )
        return EpidemicState.from_array(y_end, state.accumulating)

    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if not (rtol > 0 and atol > 0):
        raise ValueError("tolerances must be positive")

    y = np.array(state, dtype=float, copy=True)
    span = t1 - t0
    if h_min is None:
        h_min = 1e-12 * max(1.0, abs(t1))

    def f(t, yy):
        return sir_rhs(t, yy, params, beta)

    t = t0
    k1 = f(t, y)
    h = _initial_step(f, t, y, k1, span, rtol, atol)
    stages = [None] * 7
    n_steps = 0

    while t < t1:
        if n_steps >= max_steps:
            raise StepSizeUnderflow(f"exceeded {max_steps} steps at t={t:.6g}")
        last = t + h >= t1 - 1e-14 * max(1.0, abs(t1))
        if last:
            h = t1 - t
        stages[0] = k1
        for k in range(1, 7):
            incr = sum(a * stages[j] for j, a in enumerate(_A[k]) if a != 0.0)
            stages[k] = f(t + _C[k] * h, y + h * incr)
        y_new = y + h * sum(b * stages[j] for j, b in enumerate(_B5) if b != 0.0)
        err_vec = h * sum(e * stages[j] for j, e in enumerate(_E) if e != 0.0)

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.sqrt(np.mean((err_vec / scale) ** 2, axis=-1))))
        negative = bool(np.any(y_new[..., :2] < -atol))

        if not np.isfinite(err):
            err = np.inf

        if err <= 1.0 and not negative:
            accepted = True
        elif h <= h_min:
            if err > 1.0:
                raise StepSizeUnderflow(
                    f"step size fell below {h_min:.3g} at t={t:.6g}"
                )
            accepted = True
        else:
            accepted = False

        if accepted:
            t = t1 if last else t + h
            # roundoff guards: the incidence integrand is nonnegative on the clamped domain
            np.maximum(y_new[..., :2], 0.0, out=y_new[..., :2])
            np.maximum(y_new[..., C], y[..., C], out=y_new[..., C])
            y = y_new
            k1 = f(t, y) if negative else stages[6]
            n_steps += 1
            if callback is not None:
                callback(t, y)
            factor = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
            h = max(h * max(0.2, factor), h_min)
        elif negative and err <= 1.0:
            h = max(0.5 * h, h_min)
        else:
            h = max(h * max(0.2, 0.9 * err ** -0.2), h_min)
    return y


def _initial_step(f, t, y, k1, span, rtol, atol):
    if not np.all(np.isfinite(k1)):
        return span
    scale = atol + rtol * np.abs(y)
    d0 = float(np.max(np.sqrt(np.mean((y / scale) ** 2, axis=-1))))
    d1 = float(np.max(np.sqrt(np.mean((k1 / scale) ** 2, axis=-1))))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y + h0 * k1
    k2 = f(t + h0, y1)
    d2 = float(np.max(np.sqrt(np.mean(((k2 - k1) / scale) ** 2, axis=-1)))) / h0
    if not np.isfinite(d2):
        return h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


@dataclass(frozen=True)
class BurnInResult:
    state: EpidemicState
    years: int
    period: int
    last_change: float


def burn_in(
    params: ModelParams,
    init_fraction_s: float = 0.95,
    init_fraction_i: float = 0.02,
    max_years: int = 200,
    threshold: float = 1e-4,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    samples_per_year: int = 48,
    max_period: int = 4,
) -> BurnInResult:
    """Run the model onto its attractor before data collection.

    Integrates whole years from ``t = 0`` and records the annual means of
    ``s`` and ``i``. The run has settled once, for some period ``p`` up to
    ``max_period`` years, each of the last ``p`` annual means differs from
    the one ``p`` years earlier by less than ``threshold`` (relative). A
    fixed point or annual cycle settles with ``p = 1``; seasonally forced
    measles-like parameters typically lock onto a biennial cycle.

    The returned state sits at an integer year, so the seasonal phase
    restarts at ``t = 0``, and its accumulator is reset.

    Raises
    ------
    NonConvergence
        If the criterion is unmet after ``max_years``.
    """
    if not (0 < init_fraction_s < 1 and 0 < init_fraction_i < 1):
        raise ConfigError("initial fractions must lie in (0, 1)", "burn_in")
    if init_fraction_s + init_fraction_i > 1:
        raise ConfigError("initial fractions must sum to <= 1", "burn_in")

    y = np.array([init_fraction_s * params.n_pop, init_fraction_i * params.n_pop, 0.0])
    beta = seasonal(params.b0, params.b1)
    dt = 1.0 / samples_per_year
    # the initial point stands in for "year 0" so a fixed point settles in one year
    history = [y[:2].copy()]
    best = math.inf
    for year in range(max_years):
        acc = np.zeros(2)
        for k in range(samples_per_year):
            t0 = year + k * dt
            y = integrate(y, params, t0, t0 + dt, beta, rtol, atol)
            acc += y[:2]
        history.append(acc / samples_per_year)

        best = math.inf
        for p in range(1, max_period + 1):
            if len(history) < 2 * p:
                break
            change = max(
                _rel_change(history[-1 - k], history[-1 - k - p]) for k in range(p)
            )
            if change < threshold:
                state = reset_incidence(EpidemicState.from_array(y))
                return BurnInResult(state, year + 1, p, change)
            best = min(best, change)
    raise NonConvergence(
        f"burn-in did not settle within {max_years} years "
        f"(last relative change {best:.3g})",
        last_change=best,
    )


def _rel_change(a, b) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
