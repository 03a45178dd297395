# tests/conftest.py

import pytest

from sbn.features import HourlySeries, Normalizer
from sbn.model import ModelConfig, build_model
from sbn.synthetic import SynthConfig, generate_synthetic


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow benchmark tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def five_weeks() -> HourlySeries:
    """Five weeks of the default synthetic load starting on a Monday midnight"""
    return generate_synthetic(SynthConfig(n_hours=5 * 168, seed=3))


@pytest.fixture(scope="session")
def quiet_series() -> HourlySeries:
    """Six weeks without noise or oscillation"""
    return generate_synthetic(SynthConfig(n_hours=6 * 168, seed=5, noise_sigma_kw=0.0,
                                          oscillation_amplitude_kw=0.0, temp_noise_sigma_c=0.0))


@pytest.fixture
def make_model():
    """Factory: untrained model of the given boosters with a normalizer fitted on a series"""
    def factory(boosters=(), series=None, seed=0, dropout_rate=0.0, hidden_units=32, **n_inputs):
        config = ModelConfig(boosters=tuple(boosters), hidden_units=hidden_units,
                             dropout_rate=dropout_rate, n_inputs=n_inputs)
        norm = Normalizer.fit(series) if series is not None else Normalizer(6.0, 7.0, 60.0, 15.0)
        return build_model(config, seed=seed, normalizer=norm)
    return factory
