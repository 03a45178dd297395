# sbn/synthetic.py

"""
Deterministic synthetic building load.

energy(t) = base + max(0, threshold - T(t)) * slope + office(t)
            + weekly_event(t) + oscillation(t) + noise

Each term exercises one booster: the weekly event (with optional permanent
steps, possibly repeated every few weeks) is a weekly pattern shift, the
oscillation with a period not divisible by 24 h is only visible to the hourly
booster.
"""

import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from .errors import ConfigurationError
from .features import SATURDAY, HourlySeries, StageKind

log = logging.getLogger(__name__)


@dataclass
class SynthConfig:
    """Synthetic generator settings; units are kW (kWh per hour) and °C"""
    start: str = "2012-01-02T00:00:00"
    n_hours: int = 8760
    base_load_kw: float = 50.0
    heating_slope_kw_per_deg: float = 2.0
    heating_threshold_c: float = 17.0
    office_load_kw: float = 20.0
    office_start_hour: int = 8
    office_end_hour: int = 17
    event_weekday: int = SATURDAY
    event_hour: int = 10
    event_duration_hours: int = 1
    event_magnitude_kw: float = 15.0
    step_change_kw: float = 10.0
    step_date: Optional[str] = None
    step_repeat_weeks: int = 0
    step_count: int = 1
    oscillation_period_hours: float = 5.0
    oscillation_amplitude_kw: float = 5.0
    noise_sigma_kw: float = 2.0
    temp_mean_c: float = 6.0
    temp_annual_amplitude_c: float = 10.0
    temp_coldest_day: float = 35.0
    temp_daily_amplitude_c: float = 4.0
    temp_peak_hour: float = 15.0
    temp_noise_sigma_c: float = 1.0
    temp_noise_phi: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.n_hours < 1:
            raise ConfigurationError("n_hours must be at least 1")
        if not 0 <= self.event_weekday <= 6 or not 0 <= self.event_hour <= 23:
            raise ConfigurationError("Weekly event needs a weekday in 0..6 and an hour in 0..23")
        if self.event_duration_hours < 0:
            raise ConfigurationError("event_duration_hours must be non-negative")
        if self.noise_sigma_kw < 0 or self.temp_noise_sigma_c < 0:
            raise ConfigurationError("Noise levels must be non-negative")
        if not -1 < self.temp_noise_phi < 1:
            raise ConfigurationError("temp_noise_phi must lie in (-1, 1)")
        if self.oscillation_period_hours < 0:
            raise ConfigurationError("oscillation_period_hours must be non-negative")
        if self.step_count < 1 or self.step_repeat_weeks < 0:
            raise ConfigurationError("step_count must be at least 1 and step_repeat_weeks non-negative")
        if self.step_count > 1 and self.step_repeat_weeks < 1:
            raise ConfigurationError("Repeated steps need step_repeat_weeks of at least 1")
        for name in ("start", "step_date"):
            value = getattr(self, name)
            if value is None:
                continue
            try:
                pd.Timestamp(value)
            except (ValueError, TypeError) as e:
                raise ConfigurationError(f"{name} '{value}' is not a timestamp") from e

    def step_dates(self) -> List[pd.Timestamp]:
        """step_date, then step_count - 1 further steps every step_repeat_weeks weeks"""
        if self.step_date is None:
            return []
        first = pd.Timestamp(self.step_date)
        return [first + pd.Timedelta(weeks=k * self.step_repeat_weeks) for k in range(self.step_count)]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SynthConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def oscillation_period_conflicts(cfg: SynthConfig, boosters: Iterable[Any] = ()) -> bool:
    """Warn when the oscillation period is a multiple of 24 h while an hourly booster is used"""
    hourly = any(StageKind(getattr(b, "value", b)) == StageKind.HOURLY for b in boosters)
    period = cfg.oscillation_period_hours
    conflict = (hourly and cfg.oscillation_amplitude_kw != 0 and period > 0
                and float(period / 24).is_integer())
    if conflict:
        log.warning("Oscillation period %s h is divisible by 24 h; the daily booster already "
                    "sees it and the hourly booster has nothing left to learn", period)
    return conflict


def synthetic_temperature(cfg: SynthConfig, stamps: pd.DatetimeIndex, rng: np.random.Generator) -> np.ndarray:
    day = (stamps.dayofyear - 1 + stamps.hour / 24.0).to_numpy()
    annual = -cfg.temp_annual_amplitude_c * np.cos(2 * np.pi * (day - cfg.temp_coldest_day) / 365.25)
    daily = cfg.temp_daily_amplitude_c * np.cos(2 * np.pi * (stamps.hour.to_numpy() - cfg.temp_peak_hour) / 24.0)
    shocks = rng.normal(0.0, cfg.temp_noise_sigma_c * np.sqrt(1 - cfg.temp_noise_phi ** 2), len(stamps))
    noise = np.empty(len(stamps))
    previous = 0.0
    for i, shock in enumerate(shocks):
        previous = cfg.temp_noise_phi * previous + shock
        noise[i] = previous
    return cfg.temp_mean_c + annual + daily + noise


def generate_synthetic(cfg: SynthConfig) -> HourlySeries:
    """
    Build a fully valid synthetic series

    Args:
        cfg (SynthConfig): generator settings; identical settings give bit-identical output

    Returns:
        HourlySeries: energy and temperature for cfg.n_hours hours from cfg.start
    """
    start = pd.Timestamp(cfg.start).floor("h")
    stamps = pd.date_range(start, periods=cfg.n_hours, freq="h")
    temp_rng, energy_rng = (np.random.Generator(np.random.PCG64(s))
                            for s in np.random.SeedSequence(int(cfg.seed)).spawn(2))
    temperature = synthetic_temperature(cfg, stamps, temp_rng)

    hour = stamps.hour.to_numpy()
    weekday = stamps.dayofweek.to_numpy()
    energy = np.full(cfg.n_hours, cfg.base_load_kw)
    energy += np.maximum(0.0, cfg.heating_threshold_c - temperature) * cfg.heating_slope_kw_per_deg

    office = (weekday < 5) & (hour >= cfg.office_start_hour) & (hour < cfg.office_end_hour)
    energy += np.where(office, cfg.office_load_kw, 0.0)

    offset = (hour - cfg.event_hour) % 24
    event = (weekday == cfg.event_weekday) & (hour >= cfg.event_hour) & (offset < cfg.event_duration_hours)
    magnitude = np.full(cfg.n_hours, cfg.event_magnitude_kw)
    for step_at in cfg.step_dates():
        magnitude[stamps >= step_at] += cfg.step_change_kw
    energy += np.where(event, magnitude, 0.0)

    if cfg.oscillation_period_hours > 0 and cfg.oscillation_amplitude_kw != 0:
        t = np.arange(cfg.n_hours)
        energy += cfg.oscillation_amplitude_kw * np.sin(2 * np.pi * t / cfg.oscillation_period_hours)

    if cfg.noise_sigma_kw > 0:
        energy += energy_rng.normal(0.0, cfg.noise_sigma_kw, cfg.n_hours)

    return HourlySeries(start=start, energy=energy, temperature=temperature,
                        valid=np.ones(cfg.n_hours, dtype=bool))
