# tests/test_features.py

import numpy as np
import pandas as pd
import pytest

from sbn.errors import ConfigurationError, DataError, SkipSample, UsageError
from sbn.features import (FEATURE_DIM, TEMP_WINDOW, HourlySeries, Normalizer, StageKind, encode_day,
                          encode_hour, instant_feature_matrix, instant_features, residual_lags)


def flat_series(n=48, start="2012-01-02T00:00:00"):
    hours = np.arange(n, dtype=float)
    return HourlySeries(start=pd.Timestamp(start), energy=100.0 + hours, temperature=hours / 2.0,
                        valid=np.ones(n, dtype=bool))


def test_encode_hour_on_unit_circle():
    for h in range(24):
        assert np.linalg.norm(encode_hour(h)) == pytest.approx(1.0)
    np.testing.assert_allclose(encode_hour(0), [1.0, 0.0])
    np.testing.assert_allclose(encode_hour(6), [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(encode_hour(12), [-1.0, 0.0], atol=1e-15)
    with pytest.raises(UsageError):
        encode_hour(24)


def test_encode_hour_is_continuous_over_midnight():
    across_midnight = np.linalg.norm(encode_hour(23) - encode_hour(0))
    across_noon = np.linalg.norm(encode_hour(11) - encode_hour(12))
    assert across_midnight == pytest.approx(across_noon, rel=0, abs=1e-12)
    assert across_midnight == pytest.approx(2.0 * np.sin(np.pi / 24.0), rel=0, abs=1e-12)


def test_encode_day():
    np.testing.assert_array_equal(encode_day(5), [1.0, 0.0])
    np.testing.assert_array_equal(encode_day(6), [0.0, 1.0])
    for weekday in range(5):
        np.testing.assert_array_equal(encode_day(weekday), [0.0, 0.0])
    with pytest.raises(UsageError):
        encode_day(7)


def test_series_calendar_helpers():
    series = flat_series(start="2012-01-06T22:00:00")  # Friday
    assert series.hour_of_day()[:3].tolist() == [22, 23, 0]
    assert series.weekday()[:3].tolist() == [4, 4, 5]
    assert series.index_of("2012-01-07T01:00:00") == 3
    with pytest.raises(UsageError):
        series.index_of("2012-01-07T01:30:00")
    part = series.slice(2, 5)
    assert len(part) == 4 and part.start == pd.Timestamp("2012-01-07")


def test_series_rejects_misaligned_channels():
    with pytest.raises(ConfigurationError):
        HourlySeries(start=pd.Timestamp("2012-01-01"), energy=np.zeros(3), temperature=np.zeros(4),
                     valid=np.ones(3, dtype=bool))


def test_normalizer_fit_uses_valid_hours_only():
    series = flat_series(10)
    series.valid[0] = False
    series.energy[0] = 1e9
    norm = Normalizer.fit(series)
    assert norm.energy_mean == pytest.approx(np.mean(100.0 + np.arange(1, 10)))
    z = norm.standardize_energy(series.energy[1:])
    np.testing.assert_allclose(norm.destandardize_energy(z), series.energy[1:])
    assert Normalizer.from_dict(norm.to_dict()) == norm

    with pytest.raises(DataError):
        Normalizer.fit(series, 0, 1)


def test_normalizer_round_trip_on_random_vectors():
    rng = np.random.default_rng(12)
    norm = Normalizer(5.5, 7.25, 61.0, 14.5)
    energy = rng.normal(60.0, 15.0, size=1000)
    temperature = rng.normal(5.0, 8.0, size=1000)
    np.testing.assert_allclose(norm.destandardize_energy(norm.standardize_energy(energy)), energy,
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(norm.destandardize_temperature(norm.standardize_temperature(temperature)),
                               temperature, rtol=0, atol=1e-12)


def test_instant_features_window_and_calendar():
    series = flat_series()
    norm = Normalizer(0.0, 1.0, 0.0, 1.0)
    features = instant_features(series, 30, norm)
    np.testing.assert_allclose(features.temp_window, np.arange(18, 30) / 2.0)
    np.testing.assert_allclose(features.hour_enc, encode_hour(6))
    np.testing.assert_array_equal(features.day_type, [0.0, 0.0])
    assert features.as_vector().shape == (FEATURE_DIM,)


def test_instant_features_skip_short_or_invalid_history():
    series = flat_series()
    norm = Normalizer(0.0, 1.0, 0.0, 1.0)
    with pytest.raises(SkipSample) as info:
        instant_features(series, TEMP_WINDOW - 1, norm)
    assert info.value.hour == TEMP_WINDOW - 1
    instant_features(series, TEMP_WINDOW, norm)
    series.valid[20] = False
    with pytest.raises(SkipSample):
        instant_features(series, 25, norm)
    instant_features(series, 33, norm)


def test_feature_matrix_agrees_with_scalar_features(five_weeks):
    series = five_weeks.copy()
    series.valid[100:103] = False
    norm = Normalizer.fit(series)
    matrix, feasible = instant_feature_matrix(series, norm)
    assert matrix.shape == (len(series), FEATURE_DIM)
    for t in range(len(series)):
        try:
            expected = instant_features(series, t, norm).as_vector()
        except SkipSample:
            assert not feasible[t]
            continue
        assert feasible[t]
        np.testing.assert_allclose(matrix[t], expected, rtol=0, atol=1e-12)
    assert not feasible[:TEMP_WINDOW].any()
    assert not feasible[101:115].any() and feasible[115]


def test_residual_lags_oldest_first():
    assert residual_lags(StageKind.WEEKLY, 1000, 3) == [496, 664, 832]
    assert residual_lags("daily", 200, 2) == [152, 176]
    assert residual_lags("hourly", 30, 3) == [27, 28, 29]
    with pytest.raises(UsageError):
        residual_lags("daily", 200, 0)
    assert [k.period for k in StageKind] == [168, 24, 1]
