# research/sweep_cells.py

"""
Sweep cells for stacked booster research.

A cell is one booster setup trained on one training-data size and evaluated
at a set of horizons. The standard setups are the five stacks of the
architecture table: instant only, weekly, daily, weekly+daily and all three.
"""

import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from sbn.errors import UsageError
from sbn.model import ModelConfig, parse_boosters

HOURS_PER_YEAR = 8760


@dataclass
class BoosterSetup:
    """One row of a sweep table"""
    name: str
    boosters: Tuple[str, ...]
    description: str


STANDARD_SETUPS = [
    BoosterSetup("instant", (), "Instant forecaster only"),
    BoosterSetup("weekly", ("weekly",), "Instant forecaster with the weekly booster"),
    BoosterSetup("daily", ("daily",), "Instant forecaster with the daily booster"),
    BoosterSetup("weekly+daily", ("weekly", "daily"), "Weekly and daily boosters"),
    BoosterSetup("weekly+daily+hourly", ("weekly", "daily", "hourly"), "All three boosters"),
]

TRAINING_SIZES: Dict[str, int] = {
    "6mo": HOURS_PER_YEAR // 2,
    "1y": HOURS_PER_YEAR,
    "2y": 2 * HOURS_PER_YEAR,
    "6y": 6 * HOURS_PER_YEAR,
}


@dataclass
class SweepCell:
    setup: BoosterSetup
    size_name: str
    train_hours: int

    @property
    def key(self) -> str:
        return f"{self.setup.name}_{self.size_name}"


def setup_from_text(text: str) -> BoosterSetup:
    """'weekly,daily' or 'weekly+daily' (or 'instant') as a setup"""
    boosters = tuple(kind.value for kind in parse_boosters(str(text).replace("+", ",")))
    for setup in STANDARD_SETUPS:
        if setup.boosters == boosters:
            return setup
    ModelConfig(boosters=boosters)
    return BoosterSetup("+".join(boosters), boosters, "Custom booster stack")


def size_hours(name: str) -> int:
    """Hours of a training size: '6mo', '1y', '2y', '18mo' or '1000h'"""
    text = str(name).strip().lower()
    if text in TRAINING_SIZES:
        return TRAINING_SIZES[text]
    match = re.fullmatch(r"(\d+)(mo|y|h)", text)
    if not match:
        raise UsageError(f"Unknown training size '{name}' (use e.g. 6mo, 1y, 2y or 1000h)")
    value, unit = int(match.group(1)), match.group(2)
    hours = {"mo": value * HOURS_PER_YEAR // 12, "y": value * HOURS_PER_YEAR, "h": value}[unit]
    if hours < 1:
        raise UsageError(f"Training size '{name}' is empty")
    return hours


def build_cells(setups: Iterable[BoosterSetup], sizes: Sequence[str]) -> List[SweepCell]:
    """All setup x size combinations, setups outermost"""
    return [SweepCell(setup, size, size_hours(size)) for setup in setups for size in sizes]


def get_standard_setups() -> List[BoosterSetup]:
    return list(STANDARD_SETUPS)
