# tests/test_synthetic.py

import logging

import numpy as np
import pandas as pd
import pytest

from sbn.errors import ConfigurationError
from sbn.synthetic import SynthConfig, generate_synthetic, oscillation_period_conflicts

QUIET = dict(noise_sigma_kw=0.0, oscillation_amplitude_kw=0.0, temp_noise_sigma_c=0.0)


def test_same_settings_give_identical_series():
    a = generate_synthetic(SynthConfig(n_hours=500, seed=4))
    b = generate_synthetic(SynthConfig(n_hours=500, seed=4))
    c = generate_synthetic(SynthConfig(n_hours=500, seed=5))
    np.testing.assert_array_equal(a.energy, b.energy)
    np.testing.assert_array_equal(a.temperature, b.temperature)
    assert not np.array_equal(a.energy, c.energy)
    assert a.valid.all() and a.start == pd.Timestamp("2012-01-02")


def test_weekly_event_and_step():
    without = generate_synthetic(SynthConfig(n_hours=4 * 168, event_magnitude_kw=0.0, **QUIET))
    plain = generate_synthetic(SynthConfig(n_hours=4 * 168, **QUIET))
    stepped = generate_synthetic(SynthConfig(n_hours=4 * 168, step_date="2012-01-16", **QUIET))

    event = np.flatnonzero(plain.energy != without.energy)
    saturdays_10h = 5 * 24 + 10 + 168 * np.arange(4)
    np.testing.assert_array_equal(event, saturdays_10h)
    np.testing.assert_allclose(plain.energy[event] - without.energy[event], 15.0)

    changed = np.flatnonzero(stepped.energy != plain.energy)
    np.testing.assert_array_equal(changed, saturdays_10h[2:])
    np.testing.assert_allclose(stepped.energy[changed] - plain.energy[changed], 10.0)


def test_repeated_steps_accumulate():
    plain = generate_synthetic(SynthConfig(n_hours=6 * 168, **QUIET))
    stepped = generate_synthetic(SynthConfig(n_hours=6 * 168, step_date="2012-01-09", step_repeat_weeks=2,
                                             step_count=3, **QUIET))
    saturdays_10h = 5 * 24 + 10 + 168 * np.arange(6)
    np.testing.assert_allclose(stepped.energy[saturdays_10h] - plain.energy[saturdays_10h],
                               [0.0, 10.0, 10.0, 20.0, 20.0, 30.0])
    others = np.setdiff1d(np.arange(6 * 168), saturdays_10h)
    np.testing.assert_array_equal(stepped.energy[others], plain.energy[others])
    assert [str(s) for s in SynthConfig(step_date="2012-01-09", step_repeat_weeks=2, step_count=2).step_dates()] \
        == ["2012-01-09 00:00:00", "2012-01-23 00:00:00"]
    assert SynthConfig().step_dates() == []


def test_office_hours_and_heating():
    series = generate_synthetic(SynthConfig(n_hours=168, temp_mean_c=30.0, temp_annual_amplitude_c=0.0,
                                            event_magnitude_kw=0.0, **QUIET))
    # no heating above the threshold: base load plus office load
    expected = np.full(168, 50.0)
    hours = np.arange(168)
    office = (hours // 24 < 5) & (hours % 24 >= 8) & (hours % 24 < 17)
    expected[office] += 20.0
    np.testing.assert_allclose(series.energy, expected)


def test_oscillation_has_its_own_period():
    base = generate_synthetic(SynthConfig(n_hours=48, **QUIET))
    osc = generate_synthetic(SynthConfig(n_hours=48, **dict(QUIET, oscillation_amplitude_kw=5.0)))
    wave = osc.energy - base.energy
    np.testing.assert_allclose(wave[5:], wave[:-5], atol=1e-12)
    assert np.abs(wave).max() == pytest.approx(5.0 * np.sin(2 * np.pi * 1 / 5), rel=1e-12)


def test_oscillation_conflict_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="sbn.synthetic"):
        assert oscillation_period_conflicts(SynthConfig(oscillation_period_hours=48), ["hourly"])
    assert "divisible by 24" in caplog.text
    assert not oscillation_period_conflicts(SynthConfig(oscillation_period_hours=5), ["hourly"])
    assert not oscillation_period_conflicts(SynthConfig(oscillation_period_hours=24), ["weekly", "daily"])
    assert not oscillation_period_conflicts(SynthConfig(oscillation_period_hours=24, oscillation_amplitude_kw=0),
                                            ["hourly"])


def test_config_validation_and_round_trip():
    with pytest.raises(ConfigurationError):
        SynthConfig(n_hours=0)
    with pytest.raises(ConfigurationError):
        SynthConfig(step_date="someday")
    with pytest.raises(ConfigurationError):
        SynthConfig(temp_noise_phi=1.0)
    with pytest.raises(ConfigurationError):
        SynthConfig(step_date="2012-02-01", step_count=2)
    with pytest.raises(ConfigurationError):
        SynthConfig(step_count=0)
    cfg = SynthConfig(n_hours=10, step_date="2012-02-01", seed=9)
    assert SynthConfig.from_dict(dict(cfg.to_dict(), unknown=1)) == cfg
