# sbn/pipeline.py

"""
Residual pipeline of the stacked booster network.

Three ways of running the same wiring:

- trace_series: actual-fed forecasts, corrections and residuals for every
  hour of a series (inference mode). Residuals r_s(t) = y_s(t) - actual(t).
- rollout / forecast: multi-hour forecasts from origins T0 (the last observed
  hour). Residual windows read traced residuals for lag hours <= T0 and the
  stage's own estimates for lag hours > T0.
- joint_forward / joint_backward: one differentiable graph per training batch.
  Every hour a target depends on is a node; the instant forecaster and each
  stage run once per node so parameter sharing is explicit.

All values here are in standardized energy units.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, InsufficientHistoryError, SkipSample, UsageError
from .features import FEATURE_DIM, HourlySeries, Normalizer, instant_feature_matrix
from .model import (InstantCache, SbnModel, StageOutputs, instant_batch_backward,
                    instant_batch_forward)
from .nn import ForwardCache, Mode, Rng, dense_backward, dense_forward

log = logging.getLogger(__name__)


def require_normalizer(model: SbnModel) -> Normalizer:
    if model.normalizer is None:
        raise ConfigurationError("Model has no normalizer; train or load it first")
    return model.normalizer


def standardized_actuals(series: HourlySeries, norm: Normalizer) -> np.ndarray:
    """Standardized energy with NaN at invalid hours"""
    return np.where(series.valid, norm.standardize_energy(series.energy), np.nan)


# ---------------------------------------------------------------------------
# Whole-series trace
# ---------------------------------------------------------------------------

@dataclass
class SeriesTrace:
    """Stage values per hour with residuals taken from actuals; NaN where not computable"""
    forecasts: np.ndarray    # (S+1, n)
    corrections: np.ndarray  # (S, n)
    residuals: np.ndarray    # (S+1, n)
    actuals: np.ndarray      # (n,)

    @property
    def n_stages(self) -> int:
        return self.corrections.shape[0]


def trace_series(model: SbnModel, series: HourlySeries) -> SeriesTrace:
    """
    Run the pipeline over every hour of a series using actual residuals

    Args:
        model (SbnModel): model with a normalizer
        series (HourlySeries): source series

    Returns:
        SeriesTrace: forecasts y_0..y_S, corrections e_1..e_S and residuals r_0..r_S
    """
    norm = require_normalizer(model)
    n = len(series)
    n_stages = len(model.stages)
    features, feasible = instant_feature_matrix(series, norm)
    feasible &= np.isfinite(features).all(axis=1)
    actuals = standardized_actuals(series, norm)

    forecasts = np.full((n_stages + 1, n), np.nan)
    corrections = np.full((n_stages, n), np.nan)
    residuals = np.full((n_stages + 1, n), np.nan)
    if feasible.any():
        forecasts[0, feasible] = instant_batch_forward(model.instant, features[feasible])[0]
    residuals[0] = forecasts[0] - actuals

    hours = np.arange(n)
    for s, stage in enumerate(model.stages, start=1):
        idx = hours[:, None] - stage.lags[None, :]
        window = np.where(idx >= 0, residuals[s - 1][np.maximum(idx, 0)], np.nan)
        rows = np.isfinite(window).all(axis=1) & np.isfinite(forecasts[s - 1])
        if rows.any():
            estimate, _ = dense_forward(stage.net, window[rows])
            corrections[s - 1, rows] = estimate[:, 0]
        forecasts[s] = forecasts[s - 1] - corrections[s - 1]
        residuals[s] = forecasts[s] - actuals
    return SeriesTrace(forecasts, corrections, residuals, actuals)


def historical_residuals(model: SbnModel, series: HourlySeries, hours: Sequence[int],
                         upto_stage: int, trace: Optional[SeriesTrace] = None) -> np.ndarray:
    """
    Residuals forecast - actual after applying boosters 1..upto_stage

    Raises:
        SkipSample: at the first requested hour whose residual cannot be computed
    """
    if not 0 <= upto_stage <= len(model.stages):
        raise UsageError(f"upto_stage must lie in 0..{len(model.stages)}, got {upto_stage}")
    hours = np.asarray(hours, dtype=np.int64)
    if hours.size and (hours.min() < 0 or hours.max() >= len(series)):
        raise UsageError(f"Hours outside series of length {len(series)}")
    trace = trace if trace is not None else trace_series(model, series)
    values = trace.residuals[upto_stage][hours]
    missing = ~np.isfinite(values)
    if missing.any():
        raise SkipSample(int(hours[missing][0]), "missing actual or insufficient history")
    return values


# ---------------------------------------------------------------------------
# Multi-hour rollout
# ---------------------------------------------------------------------------

@dataclass
class Rollout:
    """Forecasts for targets origins[i] + 1 .. origins[i] + horizon"""
    origins: np.ndarray      # (m,)
    targets: np.ndarray      # (m, k)
    forecasts: np.ndarray    # (S+1, m, k)
    corrections: np.ndarray  # (S, m, k)

    @property
    def horizon(self) -> int:
        return self.targets.shape[1]

    def energy(self, norm: Normalizer) -> np.ndarray:
        """Forecasts in kWh"""
        return norm.destandardize_energy(self.forecasts)

    def stage_outputs(self, series: HourlySeries, norm: Normalizer) -> List[List[StageOutputs]]:
        """Per origin, per target StageOutputs in kWh"""
        energy = self.energy(norm)
        corrections = self.corrections * norm.energy_std
        stamps = series.timestamps()
        result = []
        for i in range(len(self.origins)):
            rows = []
            for h, t in enumerate(self.targets[i]):
                inside = t < len(series)
                actual = float(series.energy[t]) if inside and series.valid[t] else None
                rows.append(StageOutputs(forecasts=energy[:, i, h], corrections=corrections[:, i, h],
                                         hour=int(t), timestamp=stamps[t] if inside else None,
                                         actual=actual))
            result.append(rows)
        return result


def rollout(model: SbnModel, series: HourlySeries, origins, horizon: int,
            trace: Optional[SeriesTrace] = None) -> Rollout:
    """
    Forecast `horizon` hours ahead from each origin, lead by lead

    Args:
        model (SbnModel): trained model
        series (HourlySeries): history plus the temperatures of the forecast hours
        origins: last observed hour of each forecast
        horizon (int): hours ahead
        trace (SeriesTrace, optional): precomputed trace of the series

    Returns:
        Rollout: NaN where a value is not computable
    """
    if int(horizon) < 1:
        raise UsageError(f"Horizon must be at least 1 hour, got {horizon}")
    horizon = int(horizon)
    origins = np.atleast_1d(np.asarray(origins, dtype=np.int64))
    n = len(series)
    if origins.size and (origins.min() < 0 or origins.max() >= n):
        raise UsageError(f"Origins must lie in 0..{n - 1}")
    trace = trace if trace is not None else trace_series(model, series)

    m = origins.shape[0]
    leads = np.arange(1, horizon + 1)
    targets = origins[:, None] + leads[None, :]
    inside = targets < n
    forecasts = np.full((len(model.stages) + 1, m, horizon), np.nan)
    corrections = np.full((len(model.stages), m, horizon), np.nan)
    forecasts[0] = np.where(inside, trace.forecasts[0][np.where(inside, targets, 0)], np.nan)

    for s, stage in enumerate(model.stages, start=1):
        history = trace.residuals[s - 1]
        estimates = corrections[s - 1]
        lags = stage.lags
        for h, lead in enumerate(leads):
            future = lags < lead
            window = np.empty((m, stage.n_inputs))
            if future.any():
                window[:, future] = estimates[:, h - lags[future]]
            if (~future).any():
                past = origins[:, None] + lead - lags[~future][None, :]
                window[:, ~future] = np.where(past >= 0, history[np.maximum(past, 0)], np.nan)
            previous = forecasts[s - 1][:, h]
            rows = np.isfinite(window).all(axis=1) & np.isfinite(previous)
            if rows.any():
                estimate, _ = dense_forward(stage.net, window[rows])
                estimates[rows, h] = estimate[:, 0]
            forecasts[s][:, h] = previous - estimates[:, h]
    return Rollout(origins, targets, forecasts, corrections)


def lagged_mask(mask: np.ndarray, d: int) -> np.ndarray:
    """out[i] = mask[i - d], False where i < d"""
    out = np.zeros_like(mask)
    out[d:] = mask[:mask.shape[0] - d]
    return out


def lead_mask(mask: np.ndarray, d: int) -> np.ndarray:
    """out[i] = mask[i + d], False where i + d is past the end"""
    out = np.zeros_like(mask)
    if d < mask.shape[0]:
        out[:mask.shape[0] - d] = mask[d:]
    return out


def feasible_origins(model: SbnModel, series: HourlySeries, horizon: int,
                     trace: Optional[SeriesTrace] = None) -> np.ndarray:
    """
    Boolean mask of origins from which every stage forecast of every lead is computable

    An origin is feasible when the instant forecast exists for all targets and
    every historical residual read by the rollout exists.
    """
    if int(horizon) < 1:
        raise UsageError(f"Horizon must be at least 1 hour, got {horizon}")
    trace = trace if trace is not None else trace_series(model, series)
    instant_ok = np.isfinite(trace.forecasts[0])
    ok = np.ones(len(series), dtype=bool)
    for lead in range(1, int(horizon) + 1):
        ok &= lead_mask(instant_ok, lead)
    for s, stage in enumerate(model.stages, start=1):
        residual_ok = np.isfinite(trace.residuals[s - 1])
        offsets = {int(lag) - lead for lead in range(1, int(horizon) + 1)
                   for lag in stage.lags if lag >= lead}
        for d in sorted(offsets):
            ok &= lagged_mask(residual_ok, d)
    return ok


def forecast(model: SbnModel, series: HourlySeries, origin: int, horizon: int = 24,
             trace: Optional[SeriesTrace] = None) -> List[StageOutputs]:
    """
    Stage forecasts in kWh for hours origin+1 .. origin+horizon

    Raises:
        InsufficientHistoryError: when the origin lacks history; reports the earliest feasible origin
    """
    norm = require_normalizer(model)
    if not 0 <= origin < len(series):
        raise UsageError(f"Origin {origin} outside series of length {len(series)}")
    trace = trace if trace is not None else trace_series(model, series)
    mask = feasible_origins(model, series, horizon, trace)
    if not mask[origin]:
        feasible = np.flatnonzero(mask)
        earliest = int(feasible[0]) if feasible.size else None
        hint = f"earliest feasible origin is {earliest}" if earliest is not None else "no feasible origin"
        raise InsufficientHistoryError(
            f"Origin {origin} lacks the {model.config.history_hours} valid hours of history "
            f"or the temperatures a {horizon} h forecast needs; {hint}",
            earliest_origin=earliest,
            earliest_target=None if earliest is None else earliest + 1)
    result = rollout(model, series, [origin], horizon, trace)
    return result.stage_outputs(series, norm)[0]


# ---------------------------------------------------------------------------
# Joint training graph
# ---------------------------------------------------------------------------

@dataclass
class TrainBatch:
    """
    Self-contained training batch.

    hours lists (sorted) every hour any target depends on; features and
    actuals are rows for those hours.
    """
    targets: np.ndarray   # (B,)
    hours: np.ndarray     # (U,)
    features: np.ndarray  # (U, 16)
    actuals: np.ndarray   # (U,) standardized

    def __post_init__(self):
        if self.features.shape != (self.hours.shape[0], FEATURE_DIM):
            raise ConfigurationError(f"Batch features shape {self.features.shape} does not match its hours")
        if self.actuals.shape != self.hours.shape:
            raise ConfigurationError("Batch actuals do not match its hours")

    def __len__(self) -> int:
        return self.targets.shape[0]

    @classmethod
    def gather(cls, targets, offsets: np.ndarray, features: np.ndarray,
               actuals: np.ndarray) -> "TrainBatch":
        """Copy the rows the targets depend on out of series-wide tables"""
        targets = np.asarray(targets, dtype=np.int64)
        hours = np.unique((targets[:, None] - offsets[None, :]).ravel())
        return cls(targets, hours, features[hours].copy(), actuals[hours].copy())

    def positions(self, hours: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.hours, hours)
        if np.any(pos >= self.hours.shape[0]) or np.any(self.hours[np.minimum(pos, len(self.hours) - 1)] != hours):
            raise ConfigurationError("Batch does not contain every hour the model depends on")
        return pos

    @property
    def target_actuals(self) -> np.ndarray:
        return self.actuals[self.positions(self.targets)]


@dataclass
class _Level:
    nodes: np.ndarray       # hours where stage s runs
    self_pos: np.ndarray    # positions of nodes in the previous level
    window_pos: np.ndarray  # (nodes, n_inputs) positions of lag hours in the previous level


@dataclass
class JointPass:
    """Forward state of one batch, kept for the backward pass"""
    levels: List[_Level]
    nodes0: np.ndarray
    target_pos: List[np.ndarray]
    values: List[np.ndarray]
    instant_cache: InstantCache
    stage_caches: List[ForwardCache]
    outputs: np.ndarray       # (S+1, B)
    corrections: np.ndarray   # (S, B)
    target_actuals: np.ndarray


def _plan(model: SbnModel, targets: np.ndarray) -> Tuple[np.ndarray, List[_Level]]:
    nodes = np.unique(targets)
    levels: List[_Level] = []
    for stage in reversed(model.stages):
        lag_hours = nodes[:, None] - stage.lags[None, :]
        previous = np.union1d(nodes, lag_hours.ravel())
        levels.append(_Level(nodes, np.searchsorted(previous, nodes), np.searchsorted(previous, lag_hours)))
        nodes = previous
    levels.reverse()
    return nodes, levels


def joint_forward(model: SbnModel, batch: TrainBatch, mode: Mode = Mode.TRAIN,
                  rng: Optional[Rng] = None) -> JointPass:
    """Forward pass over every node of a batch with residuals taken from actuals"""
    nodes0, levels = _plan(model, batch.targets)
    pos0 = batch.positions(nodes0)
    y0, instant_cache = instant_batch_forward(model.instant, batch.features[pos0], mode, rng)
    values = [y0]
    residual = y0 - batch.actuals[pos0]
    stage_caches = []
    corrections = []
    for stage, level in zip(model.stages, levels):
        estimate, cache = dense_forward(stage.net, residual[level.window_pos], mode, rng)
        y = values[-1][level.self_pos] - estimate[:, 0]
        values.append(y)
        corrections.append(estimate[:, 0])
        stage_caches.append(cache)
        residual = y - batch.actuals[batch.positions(level.nodes)]

    node_sets = [nodes0] + [level.nodes for level in levels]
    target_pos = [np.searchsorted(nodes, batch.targets) for nodes in node_sets]
    outputs = np.stack([v[p] for v, p in zip(values, target_pos)])
    stage_corrections = (np.stack([c[p] for c, p in zip(corrections, target_pos[1:])])
                         if corrections else np.zeros((0, len(batch))))
    return JointPass(levels, nodes0, target_pos, values, instant_cache, stage_caches,
                     outputs, stage_corrections, batch.target_actuals)


def stage_losses(jp: JointPass) -> np.ndarray:
    """mse of every stage output against the target actuals"""
    return np.mean((jp.outputs - jp.target_actuals[None, :]) ** 2, axis=1)


def weighted_loss(jp: JointPass, weights: Sequence[float]) -> float:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (jp.outputs.shape[0],):
        raise ConfigurationError(f"Need {jp.outputs.shape[0]} loss weights, got {weights.shape[0]}")
    return float(np.dot(weights, stage_losses(jp)))


def joint_backward(model: SbnModel, jp: JointPass, weights: Sequence[float],
                   stop_history_gradient: bool = False) -> List[np.ndarray]:
    """
    Gradients of the weighted stage loss, in model.parameters() order

    Args:
        stop_history_gradient (bool): treat residual windows as constants, so
            only the target-hour path of each stage output is differentiated
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (jp.outputs.shape[0],):
        raise ConfigurationError(f"Need {jp.outputs.shape[0]} loss weights, got {weights.shape[0]}")
    batch_size = jp.outputs.shape[1]
    grads_y = [np.zeros_like(v) for v in jp.values]
    for s, (pos, w) in enumerate(zip(jp.target_pos, weights)):
        np.add.at(grads_y[s], pos, w * 2.0 / batch_size * (jp.outputs[s] - jp.target_actuals))

    stage_grads: List[List[np.ndarray]] = [None] * len(model.stages)
    for s in range(len(model.stages), 0, -1):
        level = jp.levels[s - 1]
        g = grads_y[s]
        np.add.at(grads_y[s - 1], level.self_pos, g)
        d_window, stage_grads[s - 1] = dense_backward(model.stages[s - 1].net, jp.stage_caches[s - 1], -g[:, None])
        if not stop_history_gradient:
            np.add.at(grads_y[s - 1], level.window_pos, d_window)

    grads = instant_batch_backward(model.instant, jp.instant_cache, grads_y[0])
    for group in stage_grads:
        grads.extend(group)
    return grads


def loss_and_gradients(model: SbnModel, batch: TrainBatch, weights: Sequence[float],
                       mode: Mode = Mode.TRAIN, rng: Optional[Rng] = None,
                       stop_history_gradient: bool = False
                       ) -> Tuple[float, np.ndarray, List[np.ndarray]]:
    """Weighted loss, per-stage mse and parameter gradients of one batch"""
    jp = joint_forward(model, batch, mode, rng)
    losses = stage_losses(jp)
    loss = float(np.dot(np.asarray(weights, dtype=np.float64), losses))
    return loss, losses, joint_backward(model, jp, weights, stop_history_gradient)


def joint_outputs(model: SbnModel, batch: TrainBatch, mode: Mode = Mode.TRAIN,
                  rng: Optional[Rng] = None) -> StageOutputs:
    """Stage outputs y_0..y_S and corrections for every target of a batch"""
    jp = joint_forward(model, batch, mode, rng)
    return StageOutputs(forecasts=jp.outputs, corrections=jp.corrections, actual=jp.target_actuals)
