# sbn/evaluator.py

"""
NRMSE, the seasonal-naive baseline and rolling day-ahead evaluation.

The first forecast is issued at the first midnight of the evaluation range
(origin = the hour before midnight) and further forecasts follow back to
back, one per horizon, so a 24 h horizon forecasts from every midnight and
every hour is scored once at any horizon. Each stage's predictions are
pooled over the whole range before a single NRMSE is computed, so max and
min come from the evaluation period.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import MetricError, NumericError, SkipSample, UsageError
from .features import STAGE_PERIODS, HourlySeries, StageKind
from .model import SbnModel
from .pipeline import SeriesTrace, feasible_origins, require_normalizer, rollout, trace_series
from .trainer import stage_labels

log = logging.getLogger(__name__)

SEASONAL_LAG = STAGE_PERIODS[StageKind.WEEKLY]
DEFAULT_HORIZONS = (24, 48, 96)


def nrmse(pred, actual, literal_mse: bool = False) -> float:
    """
    Normalized root mean squared error as a fraction

    Args:
        pred: forecasts
        actual: observations
        literal_mse (bool): use MSE instead of RMSE in the numerator

    Returns:
        float: RMSE / (max(actual) - min(actual))

    Raises:
        UsageError: on length mismatch or fewer than 2 values
        MetricError: when actual is constant
    """
    pred = np.asarray(pred, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if pred.shape != actual.shape:
        raise UsageError(f"pred has {pred.size} values, actual has {actual.size}")
    if actual.size < 2:
        raise UsageError("nrmse needs at least 2 values")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(actual))):
        raise NumericError("nrmse of non-finite values")
    spread = actual.max() - actual.min()
    if spread <= 0:
        raise MetricError("nrmse is undefined for constant actuals")
    error = float(np.mean((pred - actual) ** 2))
    return (error if literal_mse else np.sqrt(error)) / spread


def seasonal_naive(series: HourlySeries, t: int) -> float:
    """Energy one week before t"""
    if t < SEASONAL_LAG or t >= len(series):
        raise SkipSample(t, "no value one week earlier")
    if not series.valid[t - SEASONAL_LAG]:
        raise SkipSample(t, "value one week earlier is invalid")
    return float(series.energy[t - SEASONAL_LAG])


def seasonal_naive_series(series: HourlySeries) -> np.ndarray:
    """seasonal_naive for every hour, NaN where it is skipped"""
    out = np.full(len(series), np.nan)
    lagged = np.where(series.valid, series.energy, np.nan)
    out[SEASONAL_LAG:] = lagged[:len(series) - SEASONAL_LAG]
    return out


def midnight_origins(series: HourlySeries, first: int, last: int) -> np.ndarray:
    """Origins (hour before each midnight) of the day-ahead forecasts in [first, last]"""
    hours = np.arange(max(first, 1), last + 1)
    return hours[series.hour_of_day()[hours] == 0] - 1


def forecast_origins(series: HourlySeries, first: int, last: int, horizon: int) -> np.ndarray:
    """
    Origins of back-to-back forecasts covering [first midnight, last]

    The first origin is the hour before the first midnight in the range and
    each further origin lies `horizon` hours later, so every hour is forecast
    exactly once. For a 24 h horizon these are all the midnight origins.
    """
    midnights = midnight_origins(series, first, last)
    if midnights.size == 0:
        return midnights
    return np.arange(midnights[0], last, int(horizon))


@dataclass
class EvalReport:
    """Pooled per-stage NRMSE of one model at one horizon"""
    label: str
    horizon: int
    eval_range: Tuple[int, int]
    stage_labels: List[str]
    nrmse: Dict[str, float]
    baseline_nrmse: float
    n_origins: int
    n_skipped_origins: int
    n_predictions: int
    train_range: Optional[Tuple[int, int]] = None
    predictions: Optional[pd.DataFrame] = field(default=None, repr=False)

    @property
    def final_nrmse(self) -> float:
        return self.nrmse[self.stage_labels[-1]]

    def nrmse_percent(self) -> Dict[str, float]:
        return {k: 100.0 * v for k, v in self.nrmse.items()}

    def to_row(self) -> Dict[str, Any]:
        row = {"label": self.label, "horizon": self.horizon,
               "eval_first": self.eval_range[0], "eval_last": self.eval_range[1],
               "train_first": self.train_range[0] if self.train_range else None,
               "train_last": self.train_range[1] if self.train_range else None,
               "origins": self.n_origins, "skipped_origins": self.n_skipped_origins,
               "predictions": self.n_predictions}
        for name, value in self.nrmse_percent().items():
            row[f"nrmse_{name}"] = value
        row["nrmse_baseline"] = 100.0 * self.baseline_nrmse
        return row

    def write_predictions(self, path: Union[str, Path]) -> Path:
        if self.predictions is None:
            raise UsageError("Report was built without predictions")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.predictions.to_csv(path, index=False)
        return path


def rolling_evaluate(model: SbnModel, series: HourlySeries, eval_range: Tuple[int, int], horizon: int = 24,
                     trace: Optional[SeriesTrace] = None, literal_mse: bool = False,
                     train_range: Optional[Tuple[int, int]] = None) -> EvalReport:
    """
    Rolling evaluation with back-to-back forecasts from the first midnight of eval_range

    Each origin forecasts `horizon` hours and the next origin starts where
    that forecast ends; the last forecast is cut at the end of the range.
    All hours are pooled into one NRMSE per stage output.

    Args:
        model (SbnModel): trained model
        series (HourlySeries): history plus the evaluation range
        eval_range (Tuple[int, int]): first and last hour index evaluated
        horizon (int): hours forecast from each origin
        trace (SeriesTrace, optional): precomputed trace of the series
        literal_mse (bool): passed through to nrmse
        train_range (Tuple[int, int], optional): recorded in the report

    Returns:
        EvalReport: pooled NRMSE of every stage output and of the baseline

    Raises:
        UsageError: when no origin in the range is feasible
    """
    first, last = int(eval_range[0]), int(eval_range[1])
    if not 0 <= first <= last < len(series):
        raise UsageError(f"Evaluation range [{first}, {last}] outside series of length {len(series)}")
    if int(horizon) < 1:
        raise UsageError(f"Horizon must be at least 1 hour, got {horizon}")
    horizon = int(horizon)
    norm = require_normalizer(model)
    trace = trace if trace is not None else trace_series(model, series)

    candidates = forecast_origins(series, first, last, horizon)
    spans = np.minimum(horizon, last - candidates)
    results = []
    for span in sorted(set(spans.tolist()), reverse=True):
        group = candidates[spans == span]
        group = group[feasible_origins(model, series, span, trace)[group]]
        if group.size:
            results.append(rollout(model, series, group, span, trace))
    n_origins = sum(r.origins.shape[0] for r in results)
    skipped = candidates.shape[0] - n_origins
    if skipped:
        log.warning("%d of %d origins lack history or temperatures for a %d h forecast",
                    skipped, candidates.shape[0], horizon)
    if n_origins == 0:
        raise UsageError(f"No feasible {horizon} h forecast origin in [{first}, {last}]")

    baseline = seasonal_naive_series(series)
    hours, origins, leads, energy = [], [], [], []
    for result in results:
        values = result.energy(norm)
        targets = result.targets
        keep = series.valid[targets] & np.isfinite(baseline[targets]) & np.isfinite(values).all(axis=0)
        hours.append(targets[keep])
        origins.append(np.broadcast_to(result.origins[:, None], targets.shape)[keep])
        leads.append(np.broadcast_to(np.arange(1, result.horizon + 1), targets.shape)[keep])
        energy.append(values[:, keep])
    hours = np.concatenate(hours)
    order = np.argsort(hours, kind="stable")
    hours = hours[order]
    energy = np.concatenate(energy, axis=1)[:, order]
    actual = series.energy[hours]
    labels = stage_labels(model)
    scores = {label: nrmse(energy[s], actual, literal_mse) for s, label in enumerate(labels)}
    baseline_score = nrmse(baseline[hours], actual, literal_mse)

    predictions = pd.DataFrame({
        "timestamp": series.timestamps()[hours],
        "origin": np.concatenate(origins)[order],
        "lead": np.concatenate(leads)[order],
        "actual": actual,
    })
    for s, label in enumerate(labels):
        predictions[f"forecast_{label}"] = energy[s]
    predictions["baseline"] = baseline[hours]

    log.info("%s h=%d: %d origins, %d predictions, final NRMSE %.2f%%",
             model.config.label, horizon, n_origins, hours.size, 100 * scores[labels[-1]])
    return EvalReport(label=model.config.label, horizon=horizon, eval_range=(first, last),
                      stage_labels=labels, nrmse=scores, baseline_nrmse=baseline_score,
                      n_origins=int(n_origins), n_skipped_origins=int(skipped),
                      n_predictions=int(hours.size), train_range=train_range, predictions=predictions)


def evaluate_horizons(model: SbnModel, series: HourlySeries, eval_range: Tuple[int, int],
                      horizons: Sequence[int] = DEFAULT_HORIZONS, literal_mse: bool = False,
                      train_range: Optional[Tuple[int, int]] = None) -> List[EvalReport]:
    """rolling_evaluate at several horizons sharing one trace"""
    trace = trace_series(model, series)
    return [rolling_evaluate(model, series, eval_range, h, trace, literal_mse, train_range) for h in horizons]


def horizon_table(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """Rows = stage outputs plus the baseline, columns = horizons, values in percent"""
    table = {}
    for report in reports:
        column = report.nrmse_percent()
        column["seasonal_naive"] = 100.0 * report.baseline_nrmse
        table[f"{report.horizon}h"] = column
    frame = pd.DataFrame(table)
    frame.index.name = "output"
    return frame
