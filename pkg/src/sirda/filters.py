"""Kalman filtering: classic KF, stochastic EnKF and its augmented variants.

The generic pieces (:func:`kf_step`, :func:`enkf_predict`,
:func:`parameter_drift`, :func:`enkf_analyze`) work on any state space.
:func:`run_filter` wires them to the SIR model and the observation cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as rngs
from .dynamics import DEFAULT_ATOL, DEFAULT_RTOL, ModelParams, constant, integrate, seasonal
from .errors import ConfigError, NumericalError, SingularInnovation
from .observation import ObservationCase, observe_array

STATE, AUX, PARAM = "state", "aux", "param"


# --------------------------------------------------------------------------
# classic Kalman filter


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray


def kf_step(belief: GaussianBelief, f_matrix, g_matrix, c, d, y) -> GaussianBelief:
    """One predict/update cycle of the linear Kalman filter.

    ``d`` and ``y`` may be scalars for a single observation.
    """
    F = np.atleast_2d(np.asarray(f_matrix, dtype=float))
    G = np.atleast_2d(np.asarray(g_matrix, dtype=float))
    C = np.atleast_2d(np.asarray(c, dtype=float))
    D = np.atleast_2d(np.asarray(d, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))

    x_pred = F @ belief.mean
    P_pred = F @ belief.cov @ F.T + C
    S = G @ P_pred @ G.T + D
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > 1e14:
        raise SingularInnovation("innovation covariance is singular")
    K = np.linalg.solve(S.T, (P_pred @ G.T).T).T
    mean = x_pred + K @ (y - G @ x_pred)
    cov = (np.eye(len(mean)) - K @ G) @ P_pred
    return GaussianBelief(mean, 0.5 * (cov + cov.T))


# --------------------------------------------------------------------------
# ensembles


def ensemble_mean(members) -> np.ndarray:
    return np.asarray(members, dtype=float).mean(axis=0)


def ensemble_cov(members) -> np.ndarray:
    """Sample covariance with the 1/(N-1) normalisation."""
    X = np.asarray(members, dtype=float)
    A = X - X.mean(axis=0)
    return A.T @ A / (X.shape[0] - 1)


@dataclass
class Ensemble:
    """``members`` has shape (N, k); ``kinds`` tags each column as
    state (receives process noise), aux (carried, no noise) or param."""

    members: np.ndarray
    labels: tuple
    kinds: tuple

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=float)
        if self.members.ndim != 2:
            raise ValueError("members must be a 2-D array (N, k)")
        if self.members.shape[0] < 2:
            raise ValueError("an ensemble needs at least two members")
        if not (len(self.labels) == len(self.kinds) == self.members.shape[1]):
            raise ValueError("labels/kinds must name every column")
        if any(k not in (STATE, AUX, PARAM) for k in self.kinds):
            raise ValueError(f"unknown component kind in {self.kinds}")

    @property
    def n(self) -> int:
        return self.members.shape[0]

    def indices(self, kind) -> np.ndarray:
        return np.array([j for j, k in enumerate(self.kinds) if k == kind], dtype=int)

    def column(self, label) -> np.ndarray:
        return self.members[:, self.labels.index(label)]

    def replace(self, members) -> "Ensemble":
        return Ensemble(members, self.labels, self.kinds)

    def mean(self) -> np.ndarray:
        return ensemble_mean(self.members)

    def cov(self) -> np.ndarray:
        return ensemble_cov(self.members)


def _gaussian(rng, n, cov) -> np.ndarray:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    z = rng.standard_normal((n, cov.shape[0]))
    if np.count_nonzero(cov - np.diag(np.diag(cov))) == 0:
        return z * np.sqrt(np.diag(cov))
    w, V = np.linalg.eigh(cov)
    return z @ (V * np.sqrt(np.clip(w, 0.0, None))).T


def enkf_predict(ensemble: Ensemble, propagate: Callable, c_state, rng) -> Ensemble:
    """Forecast step: ``propagate`` maps the (N, k) member array to the
    propagated (N, k) array; process noise N(0, C) is then added to the
    state columns."""
    X = np.array(propagate(ensemble.members), dtype=float)
    if X.shape != ensemble.members.shape:
        raise ValueError("propagate must preserve the member array shape")
    idx = ensemble.indices(STATE)
    c_state = np.atleast_2d(np.asarray(c_state, dtype=float))
    if c_state.shape == (1, 1) and len(idx) > 1:
        c_state = c_state[0, 0] * np.eye(len(idx))
    if np.any(c_state):
        X[:, idx] += _gaussian(rng, ensemble.n, c_state)
    return ensemble.replace(X)


def parameter_drift(ensemble: Ensemble, e_drift, rng) -> Ensemble:
    """Random-walk step on the parameter columns."""
    idx = ensemble.indices(PARAM)
    X = ensemble.members.copy()
    e = np.atleast_2d(np.asarray(e_drift, dtype=float))
    if e.shape == (1, 1) and len(idx) > 1:
        e = e[0, 0] * np.eye(len(idx))
    if len(idx) and np.any(e):
        X[:, idx] += _gaussian(rng, ensemble.n, e)
    return ensemble.replace(X)


@dataclass(frozen=True)
class AnalysisStats:
    y_hat: np.ndarray
    y_pert: np.ndarray
    phi_yy: float
    phi_xy: np.ndarray
    gain: np.ndarray
    nu: float


def enkf_analyze_full(
    ensemble: Ensemble, observe_member: Callable, y: float, d_obs: float, rng,
    perturbations: Optional[np.ndarray] = None,
) -> tuple[Ensemble, AnalysisStats]:
    """Perturbed-observation analysis for a scalar datum.

    ``observe_member`` maps the (N, k) member array to N predicted
    observations. ``perturbations`` overrides the N(0, d_obs) draws.
    """
    Z = ensemble.members
    n = ensemble.n
    y_hat = np.asarray(observe_member(Z), dtype=float).reshape(n)
    if perturbations is None:
        w = math.sqrt(d_obs) * rng.standard_normal(n) if d_obs > 0 else np.zeros(n)
    else:
        w = np.asarray(perturbations, dtype=float).reshape(n)
    y_pert = y + w

    A = Z - Z.mean(axis=0)
    a_y = y_hat - y_hat.mean()
    phi_xy = A.T @ a_y / (n - 1)
    phi_yy = max(float(a_y @ a_y) / (n - 1), 0.0)
    denom = phi_yy + d_obs
    if not (math.isfinite(denom) and denom > 0):
        raise SingularInnovation(f"phi_yy + D = {denom!r} is not positive")
    gain = phi_xy / denom
    innov = y_pert - y_hat
    Z_new = Z + np.outer(innov, gain)
    nu = float(innov @ innov) / n
    stats = AnalysisStats(y_hat, y_pert, phi_yy, phi_xy, gain, nu)
    return ensemble.replace(Z_new), stats


def enkf_analyze(ensemble, observe_member, y, d_obs, rng, perturbations=None) -> Ensemble:
    return enkf_analyze_full(ensemble, observe_member, y, d_obs, rng, perturbations)[0]


# --------------------------------------------------------------------------
# SIR filtering driver

MODES = ("state", "constant_params", "tracking")


@dataclass(frozen=True)
class Priors:
    """Uniform initial-ensemble bounds. S and I bounds are multiples of the
    true initial values; parameter bounds are absolute."""

    s_scale: tuple = (0.9, 1.2)
    i_scale: tuple = (0.5, 2.0)
    b0: tuple = (1200.0, 2600.0)
    b1: tuple = (0.01, 0.20)
    beta: tuple = (1200.0, 2600.0)

    def __post_init__(self):
        for name in ("s_scale", "i_scale", "b0", "b1", "beta"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ConfigError("lower bound exceeds upper bound", f"priors.{name}")
            object.__setattr__(self, name, (float(lo), float(hi)))

    def to_dict(self):
        return {k: list(getattr(self, k)) for k in ("s_scale", "i_scale", "b0", "b1", "beta")}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) for k, v in d.items()})


@dataclass(frozen=True)
class NoiseSpec:
    sigma_c: float = 0.2
    sigma_d: float = 1.0
    sigma_e: float = 45.0

    def __post_init__(self):
        for name in ("sigma_c", "sigma_d", "sigma_e"):
            if not getattr(self, name) >= 0:
                raise ConfigError("must be >= 0", f"noise.{name}")

    @property
    def c_state(self):
        return self.sigma_c ** 2

    @property
    def d_obs(self):
        return self.sigma_d ** 2

    @property
    def e_drift(self):
        return self.sigma_e ** 2


@dataclass
class FilterResult:
    """Per-step record of one filtering run; row ``j`` belongs to the
    ``j``-th assimilated observation."""

    mode: str
    case: int
    seed: int
    labels: tuple
    times: np.ndarray
    mean: np.ndarray          # (M, k) posterior means
    cov: np.ndarray           # (M, k, k) posterior covariances
    prior_mean: np.ndarray    # (M, k) forecast means
    obs_pred_mean: np.ndarray
    phi_yy: np.ndarray
    nu: np.ndarray
    d_obs: np.ndarray
    cases_mean: np.ndarray    # posterior monthly-case estimate g(z)
    cases_std: np.ndarray
    initial_mean: np.ndarray
    initial_cov: np.ndarray
    extras: dict = field(default_factory=dict)

    def series(self, label):
        j = self.labels.index(label)
        return self.mean[:, j]

    def std(self, label):
        j = self.labels.index(label)
        return np.sqrt(np.clip(self.cov[:, j, j], 0.0, None))

    _ARRAYS = ("times", "mean", "cov", "prior_mean", "obs_pred_mean", "phi_yy",
               "nu", "d_obs", "cases_mean", "cases_std", "initial_mean", "initial_cov")

    def to_dict(self) -> dict:
        out = {"mode": self.mode, "case": self.case, "seed": self.seed,
               "labels": list(self.labels), "extras": self.extras}
        for name in self._ARRAYS:
            out[name] = np.asarray(getattr(self, name)).tolist()
        return out

    @classmethod
    def from_dict(cls, d) -> "FilterResult":
        kwargs = {name: np.asarray(d[name], dtype=float) for name in cls._ARRAYS}
        return cls(mode=d["mode"], case=int(d["case"]), seed=int(d["seed"]),
                   labels=tuple(d["labels"]), extras=d.get("extras", {}), **kwargs)


def _layout(mode, estimate):
    labels = ["S", "I", "C"]
    kinds = [STATE, STATE, AUX]
    if mode == "constant_params":
        labels += list(estimate)
        kinds += [PARAM] * len(estimate)
    elif mode == "tracking":
        labels.append("beta")
        kinds.append(PARAM)
    return tuple(labels), tuple(kinds)


def initial_ensemble(mode, s0, i0, priors: Priors, n, seed, estimate=("b0", "b1")) -> Ensemble:
    labels, kinds = _layout(mode, estimate)
    rng = rngs.stream(seed, rngs.PRIOR)
    u = rng.random((n, len(labels)))
    Z = np.zeros((n, len(labels)))
    bounds = {"S": tuple(s0 * v for v in priors.s_scale),
              "I": tuple(i0 * v for v in priors.i_scale),
              "C": (0.0, 0.0),
              "b0": priors.b0, "b1": priors.b1, "beta": priors.beta}
    for j, lab in enumerate(labels):
        lo, hi = bounds[lab]
        Z[:, j] = lo + (hi - lo) * u[:, j]
    return Ensemble(Z, labels, kinds)


def _clamp_params(Z, labels):
    for lab in ("b0", "beta"):
        if lab in labels:
            j = labels.index(lab)
            np.maximum(Z[:, j], 0.0, out=Z[:, j])
    if "b1" in labels:
        j = labels.index("b1")
        np.clip(Z[:, j], 0.0, np.nextafter(1.0, 0.0), out=Z[:, j])
    return Z


class SIRPropagator:
    """Advance every member over one observation interval.

    The accumulator is reset at the interval start so that incidence cases
    read the new infections of this interval only.
    """

    def __init__(self, mode, labels, params: ModelParams, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
        self.mode = mode
        self.labels = labels
        self.params = params
        self.rtol = rtol
        self.atol = atol
        self.t0 = None
        self.t1 = None

    def beta_source(self, Z):
        lab = self.labels
        if self.mode == "constant_params":
            b0 = Z[:, lab.index("b0")] if "b0" in lab else self.params.b0
            b1 = Z[:, lab.index("b1")] if "b1" in lab else self.params.b1
            return seasonal(b0, b1)
        if self.mode == "tracking":
            return constant(Z[:, lab.index("beta")])
        return seasonal(self.params.b0, self.params.b1)

    def __call__(self, Z):
        Z = np.array(Z, dtype=float, copy=True)
        y = Z[:, :3]
        np.maximum(y[:, :2], 0.0, out=y[:, :2])
        y[:, 2] = 0.0
        try:
            y_new = integrate(y, self.params, self.t0, self.t1, self.beta_source(Z),
                              self.rtol, self.atol)
        except NumericalError as exc:
            exc.member = self._locate_failure(Z)
            raise
        Z[:, :3] = y_new
        return Z

    def _locate_failure(self, Z):
        y = Z[:, :3]
        beta = self.beta_source(Z)
        for n in range(Z.shape[0]):
            b = beta(self.t0)
            single = (lambda t, n=n: np.broadcast_to(beta(t), (Z.shape[0],))[n]) if np.ndim(b) else beta
            try:
                integrate(y[n], self.params, self.t0, self.t1, single, self.rtol, self.atol)
            except NumericalError:
                return n
        return None


def run_filter(
    mode: str,
    case,
    dataset,
    params_known: ModelParams,
    priors: Priors = Priors(),
    noise: NoiseSpec = NoiseSpec(),
    n_ensemble: int = 100,
    rng_seed: int = 0,
    *,
    estimate: Sequence[str] = ("b0", "b1"),
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> FilterResult:
    """Assimilate every observation of ``dataset`` with the (augmented) EnKF.

    ``mode`` is ``"state"`` (known parameters), ``"constant_params"``
    (estimate the seasonal constants named in ``estimate``) or
    ``"tracking"`` (random-walk estimate of the transmission rate itself).
    Members integrate the SIR model between consecutive observation times
    starting from ``t = 0``; the data's true initial state sets the centre
    of the prior box for S and I.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}", "mode")
    case = ObservationCase.parse(case)
    if n_ensemble < 2:
        raise ConfigError("need at least 2 members", "n_ensemble")
    if noise.sigma_d <= 0:
        raise ConfigError("must be > 0", "noise.sigma_d")
    estimate = tuple(estimate)
    if mode == "constant_params" and any(e not in ("b0", "b1") for e in estimate):
        raise ConfigError(f"can only estimate b0/b1, got {estimate}", "estimate")

    times = np.asarray(dataset.times, dtype=float)
    obs = np.asarray(dataset.observations, dtype=float)
    s0, i0 = dataset.initial_state[:2]
    ens = initial_ensemble(mode, s0, i0, priors, n_ensemble, rng_seed, estimate)
    labels = ens.labels
    k = len(labels)
    rho = params_known.rho
    prop = SIRPropagator(mode, labels, params_known, rtol, atol)

    def observe_member(Z):
        return observe_array(case, Z[:, :3], rho)

    M = len(times)
    rec = {name: np.zeros(M) for name in ("obs_pred_mean", "phi_yy", "nu", "d_obs",
                                          "cases_mean", "cases_std")}
    mean = np.zeros((M, k))
    cov = np.zeros((M, k, k))
    prior_mean = np.zeros((M, k))
    initial_mean, initial_cov = ens.mean(), ens.cov()

    t_prev = 0.0
    for j in range(M):
        try:
            prop.t0, prop.t1 = t_prev, float(times[j])
            ens = enkf_predict(ens, prop, noise.c_state, rngs.stream(rng_seed, rngs.PROCESS, j))
            np.maximum(ens.members[:, :2], 0.0, out=ens.members[:, :2])
            if mode == "tracking":
                # members were propagated with the analysed beta; drift forms the forecast
                ens = parameter_drift(ens, noise.e_drift, rngs.stream(rng_seed, rngs.DRIFT, j))
                _clamp_params(ens.members, labels)
            prior_mean[j] = ens.mean()
            ens, stats = enkf_analyze_full(
                ens, observe_member, float(obs[j]), noise.d_obs,
                rngs.stream(rng_seed, rngs.PERTURB, j),
            )
            _clamp_params(ens.members, labels)
        except NumericalError as exc:
            if exc.step is None:
                exc.step = j
            raise
        mean[j] = ens.mean()
        cov[j] = ens.cov()
        g_post = observe_member(ens.members)
        rec["obs_pred_mean"][j] = stats.y_hat.mean()
        rec["phi_yy"][j] = stats.phi_yy
        rec["nu"][j] = stats.nu
        rec["d_obs"][j] = noise.d_obs
        rec["cases_mean"][j] = g_post.mean()
        rec["cases_std"][j] = g_post.std(ddof=1)
        t_prev = float(times[j])

    return FilterResult(
        mode=mode, case=int(case), seed=int(rng_seed), labels=labels, times=times,
        mean=mean, cov=cov, prior_mean=prior_mean, initial_mean=initial_mean,
        initial_cov=initial_cov, **rec,
    )
