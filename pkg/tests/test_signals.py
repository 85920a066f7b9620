import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zalms.errors import DomainError
from zalms.linalg import ar1_correlation
from zalms.signals import (InputModel, PlantSpec, SeedSpec, ar1_samples, independent_regressors,
                           noise_samples, plant_output, regressor_stream, regressor_vectors,
                           regressor_windows)


def test_paper_input_has_unit_variance():
    m = InputModel(0.6, 0.64)
    assert m.signal_var == pytest.approx(1.0)
    s = ar1_samples(m, SeedSpec(7), 1_000_000)
    assert s.var() == pytest.approx(1.0, abs=0.01)


def test_white_input_lag1_uncorrelated():
    s = ar1_samples(InputModel(0.0, 1.0), SeedSpec(3), 100_000)
    assert abs(np.corrcoef(s[:-1], s[1:])[0, 1]) < 0.01


def test_stream_is_seed_deterministic():
    m = InputModel(0.6, 0.64)
    a = regressor_windows(m, SeedSpec(11, 4), 5, 300)
    b = regressor_windows(m, SeedSpec(11, 4), 5, 300)
    c = regressor_windows(m, SeedSpec(11, 5), 5, 300)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_windows_are_tapped_delay_lines():
    x = regressor_windows(InputModel(0.6, 0.64), SeedSpec(1), 4, 50)
    # newest sample first: x_{n+1}[1:] == x_n[:-1]
    assert np.array_equal(x[1:, 1:], x[:-1, :-1])


def test_stream_matches_windows():
    m = InputModel(0.6, 0.64)
    seed = SeedSpec(5, 2)
    ref = regressor_windows(m, seed, 6, 10_000)
    it = regressor_stream(m, seed, 6)
    got = np.array([next(it) for _ in range(10_000)])
    assert np.array_equal(got, ref)


@pytest.mark.parametrize("mode", ["tapped_delay", "independent"])
def test_regressor_covariance_matches_R(mode):
    m = InputModel(0.6, 0.64, regressor=mode)
    x = regressor_vectors(m, SeedSpec(2), 5, 200_000)
    np.testing.assert_allclose(x.T @ x / len(x), ar1_correlation(5, 0.6, 1.0), atol=0.02)


def test_long_window_sample_covariance():
    m = InputModel(0.6, 0.64)
    s = ar1_samples(m, SeedSpec(9), 1_000_000)
    lags = np.array([np.mean(s[: s.size - k] * s[k:]) for k in range(17)])
    np.testing.assert_allclose(lags, ar1_correlation(17, 0.6, 1.0)[0], atol=0.01)


def test_independent_regressors_are_uncorrelated_in_time():
    x = independent_regressors(InputModel(0.6, 0.64), SeedSpec(4), 3, 100_000)
    assert abs(np.mean(x[1:, 0] * x[:-1, 0])) < 0.015


def test_noise_variance():
    z = noise_samples(0.01, SeedSpec(8), 1_000_000)
    assert z.var() == pytest.approx(0.01, rel=0.02)


def test_plant_output_examples():
    plant = PlantSpec(np.array([0.3, -0.2, 0.1]), 0.0)
    assert plant_output(plant, [1.0, 0.0, 0.0], 0.0) == 0.3
    assert plant_output(PlantSpec(np.zeros(3), 0.0), [1.0, 2.0, 3.0], 0.0) == 0.0
    with pytest.raises(DomainError):
        plant_output(plant, [1.0, 0.0], 0.0)


@pytest.mark.parametrize("coeff,var", [(1.0, 1.0), (-1.5, 1.0), (0.5, 0.0)])
def test_input_model_domain(coeff, var):
    with pytest.raises(DomainError):
        InputModel(coeff, var)


def test_input_model_unknown_mode():
    with pytest.raises(DomainError):
        InputModel(0.5, 1.0, regressor="bogus")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(0, 50), st.integers(1, 8))
def test_prefix_stability(seed, stream, L):
    # a shorter run is a prefix of a longer one
    m = InputModel(0.6, 0.64)
    a = regressor_windows(m, SeedSpec(seed, stream), L, 40)
    b = regressor_windows(m, SeedSpec(seed, stream), L, 90)
    np.testing.assert_array_equal(a, b[:40])
