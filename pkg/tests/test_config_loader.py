# tests/test_config_loader.py

import json

import pytest

from config.config_loader import (COMMAND_SECTIONS, DEFAULT_SETTINGS, FLAGS, RunConfig, apply_overrides,
                                  default_settings, load_config)
from sbn.cli import build_parser
from sbn.errors import ConfigurationError, UsageError
from sbn.trainer import TrainMode


def write_settings(tmp_path, data):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps(data))
    return path


def test_shipped_settings_equal_the_built_in_defaults():
    assert load_config(str(DEFAULT_SETTINGS)).values == default_settings()


def test_every_key_has_exactly_one_flag():
    keys = {f"{section}.{key}" for section, entries in default_settings().items() for key in entries}
    assert keys == set(FLAGS)
    for command, sections in COMMAND_SECTIONS.items():
        flags = [flag for dotted, (flag, _, _) in FLAGS.items() if dotted.split(".")[0] in sections]
        assert len(flags) == len(set(flags)), command


def test_comments_are_ignored_and_values_merged(tmp_path):
    path = write_settings(tmp_path, {"// note": "top-level comment",
                                     "train": {"// epochs": "short run", "epochs": 3},
                                     "model": {"boosters": ["daily"]}})
    config = load_config(str(path))
    assert config.path == str(path)
    assert config.train_config().epochs == 3
    assert config.model_config().label == "daily"
    assert config.get("train.base_lr") == 0.0025


def test_config_path_environment_variable(tmp_path, monkeypatch):
    path = write_settings(tmp_path, {"evaluate": {"horizons": [12]}})
    monkeypatch.setenv("CONFIG_PATH", str(path))
    assert load_config().get("evaluate.horizons") == [12]


@pytest.mark.parametrize("data", [{"nonsense": {}}, {"train": {"epochz": 3}}, {"train": 5}])
def test_unknown_entries_are_rejected(tmp_path, data):
    with pytest.raises(ConfigurationError):
        load_config(str(write_settings(tmp_path, data)))


def test_invalid_json_and_missing_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(str(path))
    with pytest.raises(UsageError):
        load_config(str(tmp_path / "missing.json"))


def test_command_line_overrides():
    args = build_parser().parse_args(["train", "--epochs", "3", "--boosters", "none", "--stop-history-gradient",
                                      "--train-start", "none", "--mode", "staged_frozen", "--seed", "4"])
    config = apply_overrides(RunConfig(), args, COMMAND_SECTIONS["train"])
    train_config = config.train_config()
    assert train_config.epochs == 3 and train_config.seed == 4
    assert train_config.stop_history_gradient is True
    assert train_config.mode == TrainMode.STAGED_FROZEN
    assert config.model_config().boosters == ()
    assert config.get("data.train_start") is None
    assert config.get("synth.seed") == 0


def test_synth_seed_is_separate_from_training_seed():
    args = build_parser().parse_args(["synth", "--seed", "9", "--hours", "100", "--step-date", "2012-02-01"])
    config = apply_overrides(RunConfig(), args, COMMAND_SECTIONS["synth"])
    assert config.synth_config().seed == 9
    assert config.synth_config().step_date == "2012-02-01"
    assert config.get("train.seed") == 0


def test_input_overrides_reach_the_model_config():
    config = RunConfig()
    config.set("model.daily_inputs", 4)
    config.set("model.boosters", ["weekly", "daily"])
    assert config.model_config().effective_inputs() == (2, 4)
    with pytest.raises(ConfigurationError):
        config.set("model.monthly_inputs", 2)
