# sbn/features.py

"""
Hourly series container and the instant forecaster's input features.

The instant forecaster sees only exogenous inputs: the twelve hours of
temperature before the forecast hour, the day type (Saturday, Sunday or
weekday) and the hour of day on the unit circle. It never reads energy.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, DataError, SkipSample, UsageError

log = logging.getLogger(__name__)

TEMP_WINDOW = 12
FEATURE_DIM = TEMP_WINDOW + 4

SATURDAY = 5
SUNDAY = 6


class StageKind(str, Enum):
    """Booster stage kinds; the value doubles as the configuration name"""
    WEEKLY = "weekly"
    DAILY = "daily"
    HOURLY = "hourly"

    @property
    def period(self) -> int:
        return STAGE_PERIODS[self]


STAGE_PERIODS = {StageKind.WEEKLY: 168, StageKind.DAILY: 24, StageKind.HOURLY: 1}


@dataclass
class HourlySeries:
    """
    Aligned hourly energy (kWh) and temperature (°C) with a validity mask.

    Index i corresponds to start + i hours on a naive local-time grid.
    """
    start: pd.Timestamp
    energy: np.ndarray
    temperature: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.start = pd.Timestamp(self.start)
        if self.start != self.start.floor("h"):
            raise UsageError(f"Series start {self.start} is not on a whole hour")
        self.energy = np.asarray(self.energy, dtype=np.float64)
        self.temperature = np.asarray(self.temperature, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if not (self.energy.shape == self.temperature.shape == self.valid.shape) or self.energy.ndim != 1:
            raise ConfigurationError(
                f"Channel lengths differ: energy {self.energy.shape}, "
                f"temperature {self.temperature.shape}, valid {self.valid.shape}")

    def __len__(self) -> int:
        return self.energy.shape[0]

    def timestamps(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=len(self), freq="h")

    def hour_of_day(self) -> np.ndarray:
        return (self.start.hour + np.arange(len(self))) % 24

    def weekday(self) -> np.ndarray:
        """Day of week per hour, Monday = 0"""
        days = (self.start.hour + np.arange(len(self))) // 24
        return (self.start.dayofweek + days) % 7

    def index_of(self, when) -> int:
        """Hour index of a timestamp on this grid"""
        delta = pd.Timestamp(when) - self.start
        hours = delta / pd.Timedelta(hours=1)
        if hours != int(hours):
            raise UsageError(f"{when} is not on the hourly grid of this series")
        return int(hours)

    def slice(self, first: int, last: int) -> "HourlySeries":
        """Sub-series covering hours first..last inclusive"""
        if not 0 <= first <= last < len(self):
            raise UsageError(f"Range [{first}, {last}] outside series of length {len(self)}")
        return HourlySeries(
            start=self.start + pd.Timedelta(hours=first),
            energy=self.energy[first:last + 1].copy(),
            temperature=self.temperature[first:last + 1].copy(),
            valid=self.valid[first:last + 1].copy(),
        )

    def copy(self) -> "HourlySeries":
        return HourlySeries(self.start, self.energy.copy(), self.temperature.copy(), self.valid.copy())


@dataclass
class InstantFeatures:
    """Inputs of one instant forecaster application"""
    temp_window: np.ndarray
    day_type: np.ndarray
    hour_enc: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.temp_window, self.day_type, self.hour_enc])


@dataclass
class Normalizer:
    """Training-set mean and standard deviation of temperature and energy"""
    temp_mean: float
    temp_std: float
    energy_mean: float
    energy_std: float

    def __post_init__(self):
        for name in ("temp_mean", "temp_std", "energy_mean", "energy_std"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ConfigurationError(f"Normalizer {name} is not finite")
            setattr(self, name, value)
        if self.temp_std <= 0 or self.energy_std <= 0:
            raise ConfigurationError("Normalizer standard deviations must be positive")

    @classmethod
    def fit(cls, series: HourlySeries, first: int = 0, last: Optional[int] = None) -> "Normalizer":
        """Fit on the valid hours of series[first..last]"""
        last = len(series) - 1 if last is None else last
        mask = series.valid[first:last + 1]
        if mask.sum() < 2:
            raise DataError(f"Need at least 2 valid hours to fit a normalizer in [{first}, {last}]")
        temp = series.temperature[first:last + 1][mask]
        energy = series.energy[first:last + 1][mask]
        return cls(float(temp.mean()), _positive_std(temp, "temperature"),
                   float(energy.mean()), _positive_std(energy, "energy"))

    def standardize_temperature(self, x):
        return (np.asarray(x, dtype=np.float64) - self.temp_mean) / self.temp_std

    def destandardize_temperature(self, z):
        return np.asarray(z, dtype=np.float64) * self.temp_std + self.temp_mean

    def standardize_energy(self, x):
        return (np.asarray(x, dtype=np.float64) - self.energy_mean) / self.energy_std

    def destandardize_energy(self, z):
        return np.asarray(z, dtype=np.float64) * self.energy_std + self.energy_mean

    def to_dict(self) -> Dict[str, float]:
        return {"temp_mean": self.temp_mean, "temp_std": self.temp_std,
                "energy_mean": self.energy_mean, "energy_std": self.energy_std}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Normalizer":
        return cls(data["temp_mean"], data["temp_std"], data["energy_mean"], data["energy_std"])


def _positive_std(values: np.ndarray, name: str) -> float:
    std = float(values.std())
    if std > 0:
        return std
    log.warning("Constant %s in training range; using unit scale", name)
    return 1.0


def encode_hour(h: int) -> np.ndarray:
    """Hour of day on the unit circle: (cos, sin) of 2*pi*h/24"""
    if isinstance(h, bool) or int(h) != h or not 0 <= h <= 23:
        raise UsageError(f"Hour must be an integer in 0..23, got {h}")
    angle = 2.0 * np.pi * int(h) / 24.0
    return np.array([np.cos(angle), np.sin(angle)])


def encode_day(weekday: int) -> np.ndarray:
    """Day type dummy vector: Saturday (1,0), Sunday (0,1), Monday-Friday (0,0)"""
    if isinstance(weekday, bool) or int(weekday) != weekday or not 0 <= weekday <= 6:
        raise UsageError(f"Weekday must be an integer in 0..6 (Monday=0), got {weekday}")
    return np.array([float(weekday == SATURDAY), float(weekday == SUNDAY)])


def instant_features(series: HourlySeries, t: int, norm: Normalizer) -> InstantFeatures:
    """
    Features of the instant forecaster for hour t

    Args:
        series (HourlySeries): source series
        t (int): target hour index
        norm (Normalizer): training statistics

    Returns:
        InstantFeatures: standardized temperatures at t-12..t-1 (oldest first) plus calendar encodings of t

    Raises:
        SkipSample: when fewer than 12 hours precede t or any of them is invalid
    """
    if t < TEMP_WINDOW or t >= len(series):
        raise SkipSample(t, "insufficient temperature history")
    window = slice(t - TEMP_WINDOW, t)
    if not series.valid[window].all():
        raise SkipSample(t, "invalid hour in temperature window")
    hour = int((series.start.hour + t) % 24)
    weekday = int((series.start.dayofweek + (series.start.hour + t) // 24) % 7)
    return InstantFeatures(
        temp_window=norm.standardize_temperature(series.temperature[window]),
        day_type=encode_day(weekday),
        hour_enc=encode_hour(hour),
    )


def instant_feature_matrix(series: HourlySeries, norm: Normalizer) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized instant features for every hour of a series

    Returns:
        Tuple[np.ndarray, np.ndarray]: (n x 16) feature rows and the boolean
        mask of hours whose temperature window is complete; infeasible rows
        hold NaN temperatures
    """
    n = len(series)
    features = np.full((n, FEATURE_DIM), np.nan)
    feasible = np.zeros(n, dtype=bool)
    if n > TEMP_WINDOW:
        temps = np.where(series.valid, norm.standardize_temperature(series.temperature), np.nan)
        windows = sliding_window_view(temps, TEMP_WINDOW)[: n - TEMP_WINDOW]
        complete = sliding_window_view(series.valid, TEMP_WINDOW)[: n - TEMP_WINDOW].all(axis=1)
        features[TEMP_WINDOW:, :TEMP_WINDOW] = np.where(complete[:, None], windows, np.nan)
        feasible[TEMP_WINDOW:] = complete

    weekday = series.weekday()
    angle = 2.0 * np.pi * series.hour_of_day() / 24.0
    features[:, TEMP_WINDOW] = weekday == SATURDAY
    features[:, TEMP_WINDOW + 1] = weekday == SUNDAY
    features[:, TEMP_WINDOW + 2] = np.cos(angle)
    features[:, TEMP_WINDOW + 3] = np.sin(angle)
    return features, feasible


def residual_lags(stage: Union[StageKind, str], t: int, n_inputs: int) -> List[int]:
    """Hour indices of a stage's residual window for target t, oldest first"""
    if n_inputs < 1:
        raise UsageError(f"n_inputs must be at least 1, got {n_inputs}")
    period = StageKind(stage).period
    return [t - period * j for j in range(n_inputs, 0, -1)]
