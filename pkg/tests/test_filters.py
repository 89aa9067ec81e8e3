import numpy as np
import pytest

from sirda import rng as rngs
from sirda.dynamics import ModelParams
from sirda.errors import ConfigError, NumericalError, SingularInnovation, StepSizeUnderflow
from sirda.filters import (
    AUX, PARAM, STATE, Ensemble, GaussianBelief, NoiseSpec, Priors, SIRPropagator,
    enkf_analyze, enkf_analyze_full, enkf_predict, ensemble_cov, ensemble_mean, kf_step,
    parameter_drift, run_filter,
)

P = ModelParams()


# ---------------------------------------------------------------- classic KF

def test_kf_scalar_example():
    out = kf_step(GaussianBelief(np.array([0.0]), np.array([[1.0]])), 1.0, 1.0, 0.0, 1.0, 1.0)
    assert out.mean[0] == pytest.approx(0.5)
    assert out.cov[0, 0] == pytest.approx(0.5)


def test_kf_zero_innovation_keeps_prediction():
    F = np.array([[1.0, 0.1], [0.0, 1.0]])
    b = GaussianBelief(np.array([1.0, 2.0]), np.eye(2))
    out = kf_step(b, F, [[1.0, 0.0]], 0.01 * np.eye(2), 0.5, (F @ b.mean)[0])
    np.testing.assert_allclose(out.mean, F @ b.mean, rtol=1e-14)


def test_kf_huge_observation_noise_ignores_datum():
    b = GaussianBelief(np.array([3.0]), np.array([[2.0]]))
    out = kf_step(b, 1.0, 1.0, 0.0, 1e12, 1e6)
    assert out.mean[0] == pytest.approx(3.0, abs=1e-5)
    assert out.cov[0, 0] == pytest.approx(2.0, rel=1e-10)


def test_kf_singular_innovation():
    b = GaussianBelief(np.zeros(1), np.zeros((1, 1)))
    with pytest.raises(SingularInnovation):
        kf_step(b, 1.0, 1.0, 0.0, 0.0, 1.0)


# ---------------------------------------------------------------- ensembles

def test_ensemble_statistics_match_explicit_sums():
    X = rngs.stream(3, 0).normal(size=(37, 4)) * [1.0, 10.0, 0.1, 5.0]
    N = X.shape[0]
    mean = sum(X[n] for n in range(N)) / N
    cov = sum(np.outer(X[n] - mean, X[n] - mean) for n in range(N)) / (N - 1)
    np.testing.assert_allclose(ensemble_mean(X), mean, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(ensemble_cov(X), cov, rtol=1e-13, atol=1e-15)


def _ens(n=4000, seed=0):
    X = rngs.stream(seed, 0).normal(size=(n, 4)) + [10.0, 20.0, 0.0, 5.0]
    return Ensemble(X, ("a", "b", "c", "p"), (STATE, STATE, AUX, PARAM))


def test_predict_identity_without_noise():
    e = _ens()
    out = enkf_predict(e, lambda Z: Z, 0.0, rngs.stream(0, 1))
    np.testing.assert_array_equal(out.members, e.members)


def test_predict_adds_state_noise_only():
    e = _ens(n=20000)
    out = enkf_predict(e, lambda Z: Z, 4.0, rngs.stream(0, 1))
    d = out.members - e.members
    np.testing.assert_array_equal(d[:, 2:], 0.0)
    np.testing.assert_allclose(d[:, :2].var(axis=0, ddof=1), 4.0, rtol=0.2)


def test_drift_touches_params_only():
    e = _ens(n=20000)
    out = parameter_drift(e, 9.0, rngs.stream(0, 2))
    d = out.members - e.members
    np.testing.assert_array_equal(d[:, :3], 0.0)
    assert d[:, 3].var(ddof=1) == pytest.approx(9.0, rel=0.2)
    np.testing.assert_array_equal(parameter_drift(e, 0.0, rngs.stream(0, 2)).members, e.members)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        Ensemble(np.zeros((1, 2)), ("a", "b"), (STATE, STATE))
    with pytest.raises(ValueError):
        Ensemble(np.zeros((3, 2)), ("a",), (STATE,))
    with pytest.raises(ValueError):
        Ensemble(np.zeros((3, 1)), ("a",), ("other",))


# ---------------------------------------------------------------- analysis

def test_analysis_two_member_example():
    e = Ensemble(np.array([[0.0], [2.0]]), ("x",), (STATE,))
    out, stats = enkf_analyze_full(e, lambda Z: Z[:, 0], 3.0, 2.0, None, perturbations=[0.0, 0.0])
    # phi_yy = 2, gain = 2 / (2 + 2)
    assert stats.phi_yy == 2.0 and stats.gain[0] == 0.5
    np.testing.assert_allclose(out.members[:, 0], [1.5, 2.5])
    assert stats.nu == pytest.approx((9 + 1) / 2)


def test_analysis_uncorrelated_component_is_untouched():
    X = np.array([[0.0, 1.0], [2.0, 1.0], [1.0, 1.0]])
    e = Ensemble(X, ("x", "const"), (STATE, PARAM))
    out = enkf_analyze(e, lambda Z: Z[:, 0], 5.0, 1.0, rngs.stream(0, 3))
    np.testing.assert_array_equal(out.members[:, 1], 1.0)


def test_analysis_huge_noise_is_nearly_identity():
    e = _ens(n=50)
    out = enkf_analyze(e, lambda Z: Z[:, 0], 10.0, 1e12, None, perturbations=np.zeros(50))
    np.testing.assert_allclose(out.members, e.members, atol=1e-9)


def test_analysis_zero_innovation_fixed_point():
    e = _ens(n=50)
    h = e.members[:, 0]
    # every member already predicts its perturbed datum
    out = enkf_analyze(e, lambda Z: Z[:, 0], 0.0, 1.0, None, perturbations=h)
    np.testing.assert_array_equal(out.members, e.members)


def test_analysis_gain_equals_kalman_gain_of_ensemble_covariance():
    e = _ens(n=200, seed=5)
    G = np.array([0.0, 1.0, 0.0, 0.0])
    D = 3.0
    _, stats = enkf_analyze_full(e, lambda Z: Z @ G, 20.0, D, rngs.stream(1, 3))
    Pf = e.cov()
    K = Pf @ G / (G @ Pf @ G + D)
    np.testing.assert_allclose(stats.gain, K, rtol=1e-12, atol=1e-15)
    assert stats.nu == pytest.approx(np.mean((stats.y_pert - stats.y_hat) ** 2), rel=1e-14)


def test_analysis_rejects_nonpositive_denominator():
    e = Ensemble(np.ones((3, 1)), ("x",), (STATE,))
    with pytest.raises(SingularInnovation):
        enkf_analyze(e, lambda Z: Z[:, 0], 1.0, 0.0, None, perturbations=np.zeros(3))


# ---------------------------------------------------------------- SIR driver

def test_empty_parameter_block_equals_state_filter(dataset):
    a = run_filter("state", 4, dataset, P, n_ensemble=30, rng_seed=11)
    b = run_filter("constant_params", 4, dataset, P, n_ensemble=30, rng_seed=11, estimate=())
    assert a.labels == b.labels
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.cov, b.cov)
    np.testing.assert_array_equal(a.nu, b.nu)


def test_run_is_deterministic(dataset):
    a = run_filter("tracking", 3, dataset, P, n_ensemble=20, rng_seed=4)
    b = run_filter("tracking", 3, dataset, P, n_ensemble=20, rng_seed=4)
    np.testing.assert_array_equal(a.mean, b.mean)
    c = run_filter("tracking", 3, dataset, P, n_ensemble=20, rng_seed=5)
    assert not np.array_equal(a.mean, c.mean)


def test_parameters_stay_in_domain(dataset):
    r = run_filter("constant_params", 1, dataset, P, n_ensemble=20, rng_seed=0)
    assert np.all(r.series("b0") >= 0)
    assert np.all((r.series("b1") >= 0) & (r.series("b1") < 1))
    t = run_filter("tracking", 1, dataset, P, n_ensemble=20, rng_seed=0,
                   noise=NoiseSpec(sigma_e=2000.0))
    assert np.all(t.series("beta") >= 0)


def test_result_round_trip(dataset):
    r = run_filter("constant_params", 4, dataset, P, n_ensemble=10, rng_seed=0)
    from sirda.filters import FilterResult
    back = FilterResult.from_dict(r.to_dict())
    np.testing.assert_array_equal(back.mean, r.mean)
    assert back.labels == r.labels


@pytest.mark.parametrize("kwargs, path", [
    ({"mode": "bogus"}, "mode"),
    ({"n_ensemble": 1}, "n_ensemble"),
    ({"estimate": ("lam",), "mode": "constant_params"}, "estimate"),
    ({"noise": NoiseSpec(sigma_d=0.0)}, "noise.sigma_d"),
])
def test_configuration_errors(dataset, kwargs, path):
    args = {"mode": "state", "n_ensemble": 10}
    args.update(kwargs)
    mode = args.pop("mode")
    with pytest.raises(ConfigError) as info:
        run_filter(mode, 4, dataset, P, **args)
    assert info.value.path == path


def test_priors_and_noise_validation():
    with pytest.raises(ConfigError):
        Priors(b0=(3.0, 1.0))
    with pytest.raises(ConfigError):
        NoiseSpec(sigma_c=-1.0)
    assert Priors.from_dict(Priors().to_dict()) == Priors()


def test_numerical_failure_carries_member_and_step(dataset, monkeypatch):
    import sirda.filters as F
    real = F.integrate
    culprit = {}

    def flaky(y, params, t0, t1, beta, *a, **k):
        # from the fifth interval on, the batch fails and so does member 3 alone
        if t0 >= 4 / 12 - 1e-12:
            y = np.asarray(y)
            if y.ndim == 2 or np.isclose(y[0], culprit["s"]):
                raise StepSizeUnderflow("step size underflow")
        return real(y, params, t0, t1, beta, *a, **k)

    orig_call = SIRPropagator.__call__

    def spy(self, Z):
        culprit["s"] = max(Z[3, 0], 0.0)
        return orig_call(self, Z)

    monkeypatch.setattr(F, "integrate", flaky)
    monkeypatch.setattr(SIRPropagator, "__call__", spy)
    with pytest.raises(NumericalError) as info:
        run_filter("state", 4, dataset, P, n_ensemble=10, rng_seed=0)
    assert info.value.step == 4
    assert info.value.member == 3
    assert "step" in str(info.value) and "member" in str(info.value)
