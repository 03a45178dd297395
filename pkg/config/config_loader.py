# config/config_loader.py

"""
Run configuration: JSON settings file plus command-line overrides.

Search order for the settings file: an explicit path, the CONFIG_PATH
environment variable, then config/settings.json. Keys starting with `//`
are comments. Every key of every section has exactly one command-line flag
(see FLAGS); a flag given on the command line overrides the file value.
"""

import argparse
import copy
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

from sbn.errors import ConfigurationError, UsageError
from sbn.model import ModelConfig
from sbn.synthetic import SynthConfig
from sbn.trainer import TrainConfig

log = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).parent.absolute()
DEFAULT_SETTINGS = CONFIG_DIR / "settings.json"


def _csv(text: str) -> List[str]:
    return [item.strip() for item in str(text).split(",") if item.strip()]


def _int_csv(text: str) -> List[int]:
    try:
        return [int(item) for item in _csv(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _setups(text: str) -> List[str]:
    return [item.strip() for item in str(text).split(";") if item.strip()]


BOOL = "bool"

# section.key -> (flag, parser, help)
FLAGS: Dict[str, Tuple[str, Any, str]] = {
    # synthetic data
    "synth.start": ("--start", str, "first timestamp of the synthetic series"),
    "synth.n_hours": ("--hours", int, "number of hours to generate"),
    "synth.base_load_kw": ("--base-load", float, "constant base load (kW)"),
    "synth.heating_slope_kw_per_deg": ("--heating-slope", float, "heating load per degree below the threshold (kW/°C)"),
    "synth.heating_threshold_c": ("--heating-threshold", float, "heating threshold temperature (°C)"),
    "synth.office_load_kw": ("--office-load", float, "weekday office-hours load (kW)"),
    "synth.office_start_hour": ("--office-start", int, "first office hour"),
    "synth.office_end_hour": ("--office-end", int, "office hours end (exclusive)"),
    "synth.event_weekday": ("--event-weekday", int, "weekday of the weekly event (Monday=0)"),
    "synth.event_hour": ("--event-hour", int, "start hour of the weekly event"),
    "synth.event_duration_hours": ("--event-duration", int, "duration of the weekly event (hours)"),
    "synth.event_magnitude_kw": ("--event-magnitude", float, "weekly event load (kW)"),
    "synth.step_change_kw": ("--step-change", float, "permanent change of the weekly event after --step-date (kW)"),
    "synth.step_date": ("--step-date", str, "timestamp of the weekly event step (none = no step)"),
    "synth.step_repeat_weeks": ("--step-repeat-weeks", int, "weeks between repeated steps of the weekly event"),
    "synth.step_count": ("--step-count", int, "number of steps, the first at --step-date"),
    "synth.oscillation_period_hours": ("--oscillation-period", float, "period of the oscillating load (hours, 0 = off)"),
    "synth.oscillation_amplitude_kw": ("--oscillation-amplitude", float, "amplitude of the oscillating load (kW)"),
    "synth.noise_sigma_kw": ("--noise", float, "energy noise standard deviation (kW)"),
    "synth.temp_mean_c": ("--temp-mean", float, "annual mean temperature (°C)"),
    "synth.temp_annual_amplitude_c": ("--temp-annual-amplitude", float, "annual temperature amplitude (°C)"),
    "synth.temp_coldest_day": ("--temp-coldest-day", float, "day of year of the coldest temperature"),
    "synth.temp_daily_amplitude_c": ("--temp-daily-amplitude", float, "daily temperature amplitude (°C)"),
    "synth.temp_peak_hour": ("--temp-peak-hour", float, "hour of the daily temperature peak"),
    "synth.temp_noise_sigma_c": ("--temp-noise", float, "temperature noise standard deviation (°C)"),
    "synth.temp_noise_phi": ("--temp-noise-phi", float, "AR(1) coefficient of the temperature noise"),
    "synth.seed": ("--seed", int, "generator seed"),
    # model
    "model.boosters": ("--boosters", _csv, "boosters in stacking order, e.g. weekly,daily,hourly or none"),
    "model.hidden_units": ("--hidden-units", int, "hidden units of every dense head"),
    "model.dropout_rate": ("--dropout", float, "dropout rate of hidden layers"),
    "model.weekly_inputs": ("--weekly-inputs", int, "override the weekly booster input count"),
    "model.daily_inputs": ("--daily-inputs", int, "override the daily booster input count"),
    "model.hourly_inputs": ("--hourly-inputs", int, "override the hourly booster input count"),
    # training
    "train.loss_weight_final": ("--loss-weight-final", float, "loss weight of the final output"),
    "train.loss_weight_earlier": ("--loss-weight-earlier", float, "loss weight of every earlier output"),
    "train.base_lr": ("--lr", float, "initial Adam learning rate"),
    "train.batch_size": ("--batch-size", int, "samples per batch"),
    "train.epochs": ("--epochs", int, "epochs (per phase in staged modes)"),
    "train.reference_decay": ("--reference-decay", float, "learning-rate decay per reference epoch"),
    "train.reference_batches_per_epoch": ("--reference-batches", int, "batches per epoch of the reference dataset"),
    "train.seed": ("--seed", int, "training seed (weights, dropout, shuffling)"),
    "train.mode": ("--mode", str, "joint_weighted, final_only, staged_frozen or staged_unfrozen"),
    "train.stop_history_gradient": ("--stop-history-gradient", BOOL, "do not backpropagate through residual windows"),
    # data ranges
    "data.train_start": ("--train-start", str, "first training target timestamp (default: series start)"),
    "data.train_end": ("--train-end", str, "last training target timestamp (default: the hour before the evaluation range)"),
    "data.eval_start": ("--eval-start", str, "first evaluated timestamp (default: --eval-hours before the end)"),
    "data.eval_end": ("--eval-end", str, "last evaluated timestamp (default: series end)"),
    "data.eval_hours": ("--eval-hours", int, "length of the default evaluation range"),
    "data.max_gap_hours": ("--max-gap", int, "longest interpolated gap on ingestion (hours)"),
    # evaluation
    "evaluate.horizons": ("--horizons", _int_csv, "forecast horizons in hours, e.g. 24,48,96"),
    "evaluate.literal_mse": ("--literal-mse", BOOL, "use MSE instead of RMSE in NRMSE"),
    # single forecast
    "forecast.origin": ("--origin", str, "last observed timestamp (default: latest possible)"),
    "forecast.horizon": ("--horizon", int, "hours to forecast"),
    # sweep
    "sweep.setups": ("--setups", _setups, "booster setups separated by ';', e.g. 'instant;weekly;weekly,daily'"),
    "sweep.sizes": ("--sizes", _csv, "training sizes, e.g. 6mo,1y,6y"),
    "sweep.workers": ("--workers", int, "parallel sweep cells"),
    "sweep.save_models": ("--save-models", BOOL, "archive the model of every cell"),
    # files
    "paths.data": ("--data", str, "input CSV (synth writes it)"),
    "paths.model": ("--model", str, "model archive"),
    "paths.loss_history": ("--loss-out", str, "loss history CSV (default: next to the model)"),
    "paths.report": ("--report", str, "evaluation or forecast CSV"),
    "paths.predictions": ("--predictions", str, "per-hour prediction dump prefix"),
    "paths.out": ("--out", str, "output directory of sweeps"),
    # logging
    "logging.verbose": ("--verbose", BOOL, "debug logging"),
}

COMMAND_SECTIONS: Dict[str, List[str]] = {
    "synth": ["synth", "model", "paths", "logging"],
    "train": ["model", "train", "data", "paths", "logging"],
    "evaluate": ["data", "evaluate", "paths", "logging"],
    "forecast": ["data", "forecast", "paths", "logging"],
    "sweep": ["sweep", "model", "train", "data", "evaluate", "paths", "logging"],
}


def default_settings() -> Dict[str, Dict[str, Any]]:
    """Built-in values of every configuration key"""
    model = ModelConfig()
    return {
        "synth": SynthConfig().to_dict(),
        "model": {"boosters": [k.value for k in model.boosters], "hidden_units": model.hidden_units,
                  "dropout_rate": model.dropout_rate, "weekly_inputs": None,
                  "daily_inputs": None, "hourly_inputs": None},
        "train": TrainConfig().to_dict(),
        "data": {"train_start": None, "train_end": None, "eval_start": None, "eval_end": None,
                 "eval_hours": 8760, "max_gap_hours": 6},
        "evaluate": {"horizons": [24, 48, 96], "literal_mse": False},
        "forecast": {"origin": None, "horizon": 24},
        "sweep": {"setups": ["instant", "weekly", "daily", "weekly,daily", "weekly,daily,hourly"],
                  "sizes": ["6mo", "1y", "6y"], "workers": 1, "save_models": False},
        "paths": {"data": "data/load.csv", "model": "models/sbn.json", "loss_history": None,
                  "report": "evaluation.csv", "predictions": None, "out": "research/sweep_output"},
        "logging": {"verbose": False},
    }


@dataclass
class RunConfig:
    """Validated configuration values by section"""
    values: Dict[str, Dict[str, Any]] = field(default_factory=default_settings)
    path: Optional[str] = None

    def section(self, name: str) -> Dict[str, Any]:
        if name not in self.values:
            raise ConfigurationError(f"Unknown configuration section '{name}'")
        return self.values[name]

    def get(self, dotted: str) -> Any:
        section, key = dotted.split(".", 1)
        return self.section(section)[key]

    def set(self, dotted: str, value: Any) -> None:
        section, key = dotted.split(".", 1)
        if key not in self.section(section):
            raise ConfigurationError(f"Unknown configuration key '{dotted}'")
        self.values[section][key] = value

    def synth_config(self) -> SynthConfig:
        return SynthConfig.from_dict(self.section("synth"))

    def model_config(self, boosters: Optional[Iterable[str]] = None) -> ModelConfig:
        m = self.section("model")
        n_inputs = {kind: m[f"{kind}_inputs"] for kind in ("weekly", "daily", "hourly")
                    if m.get(f"{kind}_inputs") is not None}
        return ModelConfig(boosters=tuple(m["boosters"] if boosters is None else boosters),
                           hidden_units=int(m["hidden_units"]), dropout_rate=float(m["dropout_rate"]),
                           n_inputs=n_inputs)

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict(self.section("train"))

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return copy.deepcopy(self.values)


def _merge(values: Dict[str, Dict[str, Any]], data: Dict[str, Any], source: str) -> None:
    for section, entries in data.items():
        if section.startswith("//"):
            continue
        if section not in values or not isinstance(entries, dict):
            raise ConfigurationError(f"{source}: unknown configuration section '{section}'")
        for key, value in entries.items():
            if key.startswith("//"):
                continue
            if key not in values[section]:
                raise ConfigurationError(f"{source}: unknown configuration key '{section}.{key}'")
            values[section][key] = value


def find_config(path: Optional[str] = None) -> Optional[Path]:
    """First existing settings file in search order, or None"""
    locations = []
    if path:
        explicit = Path(path)
        if not explicit.exists():
            raise UsageError(f"Configuration file not found: {explicit}")
        return explicit
    env_path = os.environ.get("CONFIG_PATH")
    if env_path:
        locations.append(Path(env_path))
    locations.append(DEFAULT_SETTINGS)
    for location in locations:
        if location.exists():
            return location
    return None


def load_config(path: Optional[str] = None) -> RunConfig:
    """
    Load the run configuration with fallback to built-in defaults

    Args:
        path (str, optional): explicit settings file

    Returns:
        RunConfig: defaults updated with the file's values
    """
    values = default_settings()
    config_path = find_config(path)
    if config_path is None:
        log.debug("No settings file found; using built-in defaults")
        return RunConfig(values)
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{config_path}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{config_path}: top level must be an object")
    _merge(values, data, str(config_path))
    log.debug("Loaded configuration from %s", config_path)
    return RunConfig(values, str(config_path))


def flag_dest(dotted: str) -> str:
    return dotted.replace(".", "__")


def add_flags(parser: argparse.ArgumentParser, sections: Iterable[str]) -> None:
    """Register the flag of every key of the given sections"""
    for dotted, (flag, kind, text) in FLAGS.items():
        if dotted.split(".", 1)[0] not in sections:
            continue
        help_text = f"{text} [{dotted}]"
        if kind == BOOL:
            parser.add_argument(flag, dest=flag_dest(dotted), action=argparse.BooleanOptionalAction,
                                default=None, help=help_text)
        else:
            parser.add_argument(flag, dest=flag_dest(dotted), type=kind, default=None, help=help_text)


def apply_overrides(config: RunConfig, args: argparse.Namespace, sections: Iterable[str]) -> RunConfig:
    """Copy every flag that was given onto the configuration"""
    for dotted in FLAGS:
        if dotted.split(".", 1)[0] not in sections:
            continue
        value = getattr(args, flag_dest(dotted), None)
        if value is not None:
            if isinstance(value, str) and value.lower() in ("none", "null") and dotted != "model.boosters":
                value = None
            config.set(dotted, value)
    return config
