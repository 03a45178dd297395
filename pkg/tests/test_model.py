# tests/test_model.py

import numpy as np
import pytest

from sbn.errors import ConfigurationError, UsageError
from sbn.features import StageKind
from sbn.model import (ModelConfig, build_model, instant_batch_forward, instant_forward, parse_boosters,
                       stage_forward)

ARCHITECTURES = [
    ((), 238, 3),
    (("weekly",), 399, 5),
    (("daily",), 527, 5),
    (("weekly", "daily"), 624, 7),
    (("weekly", "daily", "hourly"), 1457, 9),
]


@pytest.mark.parametrize("boosters,parameters,layers", ARCHITECTURES)
def test_parameter_and_layer_counts(boosters, parameters, layers):
    model = build_model(ModelConfig(boosters=boosters))
    assert model.parameter_count == parameters
    assert model.layer_count == layers
    assert sum(p.size for p in model.parameters()) == parameters


def test_effective_inputs_standalone_and_stacked():
    assert ModelConfig(boosters=("weekly",)).effective_inputs() == (3,)
    assert ModelConfig(boosters=("daily",)).effective_inputs() == (7,)
    assert ModelConfig(boosters=("hourly",)).effective_inputs() == (24,)
    assert ModelConfig(boosters=("weekly", "daily")).effective_inputs() == (2, 6)
    assert ModelConfig().effective_inputs() == (2, 6, 24)
    assert ModelConfig(boosters=("daily",), n_inputs={"daily": 4}).effective_inputs() == (4,)


def test_history_hours():
    full = ModelConfig()
    assert full.lag_depth == 2 * 168 + 6 * 24 + 24 == 504
    assert full.history_hours == 516
    assert ModelConfig(boosters=()).history_hours == 12
    assert ModelConfig(boosters=("daily",)).history_hours == 7 * 24 + 12


def test_dependency_offsets():
    np.testing.assert_array_equal(ModelConfig(boosters=("daily",)).dependency_offsets(),
                                  24 * np.arange(8))
    offsets = ModelConfig(boosters=("weekly", "daily")).dependency_offsets()
    assert offsets[0] == 0 and offsets[-1] == 2 * 168 + 6 * 24
    assert 168 in offsets and 24 in offsets and 168 + 24 in offsets
    assert ModelConfig().dependency_offsets().max() == 504


def test_stage_lags_oldest_first():
    lags = ModelConfig().stage_lags()
    np.testing.assert_array_equal(lags[0], [336, 168])
    np.testing.assert_array_equal(lags[1], [144, 120, 96, 72, 48, 24])
    np.testing.assert_array_equal(lags[2], np.arange(24, 0, -1))


def test_parse_boosters():
    assert parse_boosters("weekly, daily") == (StageKind.WEEKLY, StageKind.DAILY)
    assert parse_boosters("none") == ()
    assert parse_boosters(["instant"]) == ()
    assert parse_boosters(None) == ()
    with pytest.raises(UsageError):
        parse_boosters("monthly")


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ModelConfig(boosters=("daily", "weekly"))
    with pytest.raises(ConfigurationError):
        ModelConfig(boosters=("daily", "daily"))
    with pytest.raises(ConfigurationError):
        ModelConfig(boosters=("daily",), n_inputs={"daily": 0})
    config = ModelConfig(boosters=("weekly", "hourly"), hidden_units=8, n_inputs={"hourly": 6})
    assert ModelConfig.from_dict(config.to_dict()) == config
    assert config.label == "weekly+hourly"
    assert ModelConfig(boosters=()).label == "instant"


def test_build_model_is_seeded():
    a = build_model(ModelConfig(), seed=3)
    b = build_model(ModelConfig(), seed=3)
    c = build_model(ModelConfig(), seed=4)
    assert all(np.array_equal(p, q) for p, q in zip(a.parameters(), b.parameters()))
    assert not all(np.array_equal(p, q) for p, q in zip(a.parameters(), c.parameters()))


def test_instant_weights_do_not_depend_on_boosters():
    alone = build_model(ModelConfig(boosters=()), seed=9)
    stacked = build_model(ModelConfig(), seed=9)
    assert all(np.array_equal(p, q) for p, q in zip(alone.instant.parameters(), stacked.instant.parameters()))


def test_truncated_shares_weights_and_copy_does_not():
    model = build_model(ModelConfig(), seed=1)
    sub = model.truncated(1)
    assert sub.config.boosters == (StageKind.WEEKLY,)
    assert sub.config.effective_inputs() == (2,)
    sub.stages[0].net.layers[0].bias[0] = 42.0
    assert model.stages[0].net.layers[0].bias[0] == 42.0
    clone = model.copy()
    clone.instant.head.layers[0].bias[0] = -1.0
    assert model.instant.head.layers[0].bias[0] == 0.0
    with pytest.raises(UsageError):
        model.truncated(4)


def test_parameter_groups_order():
    model = build_model(ModelConfig())
    groups = model.parameter_groups()
    assert len(groups) == 4
    assert [sum(p.size for p in g) for g in groups] == [238, 129, 257, 833]


def test_instant_forward_matches_batch():
    model = build_model(ModelConfig(boosters=()), seed=2)
    x = np.random.default_rng(0).normal(size=(4, 16))
    batch, _ = instant_batch_forward(model.instant, x)
    for row, expected in zip(x, batch):
        assert instant_forward(model, row) == pytest.approx(expected, abs=1e-14)
    with pytest.raises(ConfigurationError):
        instant_batch_forward(model.instant, np.zeros((2, 15)))


def test_stage_forward_checks_window_length():
    model = build_model(ModelConfig(boosters=("daily",)), seed=2)
    stage = model.stages[0]
    assert np.isfinite(stage_forward(stage, np.zeros(7)))
    with pytest.raises(ConfigurationError):
        stage_forward(stage, np.zeros(6))
