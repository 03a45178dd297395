# sbn/data_io.py

"""
CSV ingestion and export of hourly energy/temperature series.

Input format: header `timestamp,energy_kwh,temperature_c`, ISO-8601 local
timestamps, empty field = missing value.
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DataError
from .features import HourlySeries

log = logging.getLogger(__name__)

COLUMNS = ["timestamp", "energy_kwh", "temperature_c"]
MAX_GAP_HOURS = 6
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"


@dataclass
class IngestSummary:
    rows: int
    duplicates_averaged: int
    hours_interpolated: int
    hours_invalidated: int

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


def _parse_numbers(values: pd.Series, column: str) -> np.ndarray:
    out = np.empty(len(values))
    for i, text in enumerate(values):
        text = text.strip()
        if text == "":
            out[i] = np.nan
            continue
        try:
            out[i] = float(text)
        except ValueError:
            raise DataError(f"Line {i + 2}: cannot parse {column} value '{text}'") from None
    return out


def _parse_timestamps(values: pd.Series) -> pd.DatetimeIndex:
    stamps = pd.to_datetime(values.str.strip(), errors="coerce")
    bad = np.flatnonzero(pd.isna(stamps))
    if bad.size:
        i = int(bad[0])
        raise DataError(f"Line {i + 2}: cannot parse timestamp '{values.iloc[i]}'")
    stamps = pd.DatetimeIndex(stamps)
    if stamps.tz is not None:
        stamps = stamps.tz_localize(None)
    return stamps.round("h")


def _fill_short_gaps(values: pd.Series, max_gap: int) -> Tuple[pd.Series, np.ndarray]:
    """Linear interpolation of interior NaN runs of at most max_gap hours"""
    missing = values.isna()
    run_id = (~missing).cumsum()
    run_length = missing.groupby(run_id).transform("sum")
    filled = values.interpolate(method="linear", limit_area="inside")
    too_long = missing & (run_length > max_gap)
    filled[too_long] = np.nan
    interpolated = missing.to_numpy() & filled.notna().to_numpy()
    return filled, interpolated


def load_series(path: Union[str, Path], max_gap_hours: int = MAX_GAP_HOURS) -> Tuple[HourlySeries, IngestSummary]:
    """
    Read a CSV onto a strict hourly grid

    Records are snapped to the nearest hour. Two records on the same hour
    (a repeated daylight-saving hour) are averaged; missing hours are gaps.
    Gaps of at most max_gap_hours between valid neighbours are linearly
    interpolated, longer ones are marked invalid.

    Args:
        path (Union[str, Path]): CSV file
        max_gap_hours (int): longest interpolated gap

    Returns:
        Tuple[HourlySeries, IngestSummary]: the series and what was repaired

    Raises:
        DataError: unreadable file, bad header, unparseable value or
            timestamps out of order (with the offending line number)
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise DataError(f"Data file not found: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot read {path}: {e}") from None
    if list(frame.columns) != COLUMNS:
        raise DataError(f"{path}: expected header {','.join(COLUMNS)}, got {','.join(map(str, frame.columns))}")
    if frame.empty:
        raise DataError(f"{path}: no data rows")

    stamps = _parse_timestamps(frame["timestamp"])
    energy = _parse_numbers(frame["energy_kwh"], "energy_kwh")
    temperature = _parse_numbers(frame["temperature_c"], "temperature_c")

    steps = np.diff(stamps.asi8)
    backwards = np.flatnonzero(steps < 0)
    if backwards.size:
        raise DataError(f"Line {int(backwards[0]) + 3}: timestamp {stamps[backwards[0] + 1]} goes backwards")
    records = pd.DataFrame({"energy": energy, "temperature": temperature}, index=stamps)
    counts = records.groupby(level=0).size()
    if (counts > 2).any():
        hour = counts.index[counts > 2][0]
        line = int(np.flatnonzero(stamps == hour)[2]) + 2
        raise DataError(f"Line {line}: more than two records for hour {hour}")
    duplicates = int((counts == 2).sum())
    if duplicates:
        log.info("Averaged %d repeated hours", duplicates)
    records = records.groupby(level=0).mean()

    grid = pd.date_range(records.index[0], records.index[-1], freq="h")
    records = records.reindex(grid)
    energy_filled, energy_interp = _fill_short_gaps(records["energy"], max_gap_hours)
    temp_filled, temp_interp = _fill_short_gaps(records["temperature"], max_gap_hours)
    valid = energy_filled.notna().to_numpy() & temp_filled.notna().to_numpy()

    summary = IngestSummary(rows=len(frame), duplicates_averaged=duplicates,
                            hours_interpolated=int((energy_interp | temp_interp).sum()),
                            hours_invalidated=int((~valid).sum()))
    log.info("Ingested %s: %s", path, summary.to_dict())
    series = HourlySeries(start=grid[0], energy=energy_filled.to_numpy(),
                          temperature=temp_filled.to_numpy(), valid=valid)
    return series, summary


def ingest_csv(path: Union[str, Path], max_gap_hours: int = MAX_GAP_HOURS) -> HourlySeries:
    """Read a CSV onto a strict hourly grid (see load_series)"""
    return load_series(path, max_gap_hours)[0]


def write_csv(series: HourlySeries, path: Union[str, Path]) -> Path:
    """Write a series in the ingestion format; invalid hours get empty fields"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({
        "timestamp": series.timestamps().strftime(TIMESTAMP_FORMAT),
        "energy_kwh": [repr(float(x)) if ok else "" for x, ok in zip(series.energy, series.valid)],
        "temperature_c": [repr(float(x)) if ok else "" for x, ok in zip(series.temperature, series.valid)],
    })
    frame.to_csv(path, index=False, lineterminator="\n")
    return path
