import numpy as np
import pytest
from hypothesis import given, strategies as st

from sirda import rng as rngs
from sirda.dynamics import EpidemicState, ModelParams
from sirda.errors import AccumulatorUnset, ConfigError, DomainError
from sirda.observation import NoiseModel, ObservationCase as OC, corrupt, observe, observe_array

P = ModelParams()
pos = st.floats(0.0, 1e5)


def test_worked_examples():
    y = np.array([5000.0, 20.0, 150.0])
    assert observe_array(OC(1), y, 0.7) == 20.0
    assert observe_array(OC(2), y, 0.7) == pytest.approx(14.0)
    assert observe_array(OC(3), y, 0.7) == 150.0
    assert observe_array(OC(4), y, 0.7) == pytest.approx(105.0)


@given(s=pos, i=pos, c=pos, rho=st.floats(0.01, 1.0))
def test_under_reported_cases_scale_exactly(s, i, c, rho):
    y = np.array([s, i, c])
    assert observe_array(OC(4), y, rho) == rho * observe_array(OC(3), y, rho)
    assert observe_array(OC(2), y, rho) == rho * observe_array(OC(1), y, rho)
    assert observe_array(OC(4), y, 1.0) == observe_array(OC(3), y, 1.0)
    assert observe_array(OC(2), y, 1.0) == observe_array(OC(1), y, 1.0)


@given(a=pos, b=pos, rho=st.floats(0.01, 1.0))
def test_monotone_in_the_observed_component(a, b, rho):
    lo, hi = min(a, b), max(a, b)
    for case in OC:
        j = 2 if case.uses_incidence else 1
        y_lo, y_hi = np.zeros(3), np.zeros(3)
        y_lo[j], y_hi[j] = lo, hi
        assert observe_array(case, y_lo, rho) <= observe_array(case, y_hi, rho)


def test_batch_with_per_member_rho():
    Y = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    rho = np.array([0.5, 0.25])
    np.testing.assert_array_equal(observe_array(OC(4), Y, rho), [1.5, 1.5])
    np.testing.assert_array_equal(observe_array(OC(1), Y), [2.0, 5.0])


def test_incidence_needs_reset_accumulator():
    st_ = EpidemicState(5000.0, 20.0, 0.0)
    with pytest.raises(AccumulatorUnset):
        observe(OC(3), st_, P)
    assert observe(OC(1), st_, P) == 20.0
    ready = EpidemicState(5000.0, 20.0, 12.0, accumulating=True)
    assert observe(OC(4), ready, P) == pytest.approx(0.7 * 12.0)


@pytest.mark.parametrize("value, expected", [
    (4, OC(4)), ("3", OC(3)), ("prevalence", OC(1)), ("under-reported-incidence", OC(4)),
])
def test_case_parsing(value, expected):
    assert OC.parse(value) is expected


@pytest.mark.parametrize("value", [0, 5, "x", None])
def test_case_parsing_rejects(value):
    with pytest.raises(ConfigError):
        OC.parse(value)


def test_zero_noise_returns_expected_value():
    rng = rngs.stream(0, rngs.DATA)
    assert corrupt(123.4, NoiseModel("additive", 0.0), rng) == 123.4
    assert corrupt(123.4, NoiseModel("multiplicative", 0.0), rng) == 123.4


def test_additive_noise_moments():
    n, sigma, v = 100_000, 2.0, 50.0
    draws = corrupt(np.full(n, v), NoiseModel("additive", sigma), rngs.stream(1, rngs.DATA))
    assert abs(draws.mean() - v) < 3 * sigma / np.sqrt(n)
    assert draws.var(ddof=1) == pytest.approx(sigma ** 2, rel=0.05)


def test_multiplicative_noise_moments_and_positivity():
    n, sigma, v = 100_000, 0.25, 40.0
    draws = corrupt(np.full(n, v), NoiseModel("multiplicative", sigma), rngs.stream(2, rngs.DATA))
    assert np.all(draws > 0)
    logs = np.log(draws / v)
    assert abs(logs.mean()) < 3 * sigma / np.sqrt(n)
    assert logs.var(ddof=1) == pytest.approx(sigma ** 2, rel=0.05)


def test_multiplicative_noise_rejects_nonpositive():
    with pytest.raises(DomainError):
        corrupt(np.array([1.0, 0.0]), NoiseModel("multiplicative", 0.1), rngs.stream(0, 4))


def test_noise_model_validation_and_round_trip():
    with pytest.raises(ConfigError):
        NoiseModel("poisson", 1.0)
    with pytest.raises(ConfigError):
        NoiseModel("additive", -1.0)
    m = NoiseModel("multiplicative", 0.3)
    assert NoiseModel.from_dict(m.to_dict()) == m
