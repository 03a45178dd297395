# sbn/trainer.py

"""
Sample assembly and training of the stacked booster network.

Joint training optimizes every stage output at once:

    loss = w_earlier * sum(mse(y_s) for s < S) + w_final * mse(y_S)

Staged training adds one booster at a time; each phase trains the model
truncated to the instant forecaster and the first p boosters on
w_final * mse(y_p) with a fresh optimizer. The learning rate decays per
batch so that one epoch of the five-year reference dataset shrinks it by 2%.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import (ConfigurationError, InsufficientHistoryError, NumericError, TrainingDivergedError,
                     UsageError)
from .features import HourlySeries, Normalizer, instant_feature_matrix
from .model import ModelConfig, SbnModel
from .nn import AdamState, Mode, Rng, adam_step, make_rng
from .pipeline import TrainBatch, lagged_mask, loss_and_gradients, standardized_actuals

log = logging.getLogger(__name__)

HOURS_PER_YEAR = 8760
REFERENCE_YEARS = 5


class TrainMode(str, Enum):
    JOINT_WEIGHTED = "joint_weighted"
    FINAL_ONLY = "final_only"
    STAGED_FROZEN = "staged_frozen"
    STAGED_UNFROZEN = "staged_unfrozen"

    @property
    def staged(self) -> bool:
        return self in (TrainMode.STAGED_FROZEN, TrainMode.STAGED_UNFROZEN)


def reference_batches_per_epoch(hours: int = REFERENCE_YEARS * HOURS_PER_YEAR,
                                history_hours: int = 516, batch_size: int = 256) -> int:
    """Batches per epoch of the reference dataset (every hour after the history is a target)"""
    if batch_size < 1:
        raise UsageError(f"batch_size must be at least 1, got {batch_size}")
    targets = hours - history_hours
    if targets < 1:
        raise UsageError(f"{hours} hours leave no targets after {history_hours} hours of history")
    return math.ceil(targets / batch_size)


DEFAULT_REFERENCE_BATCHES = reference_batches_per_epoch()

@dataclass
class TrainConfig:
    """Training hyperparameters"""
    loss_weight_final: float = 0.9
    loss_weight_earlier: float = 0.1
    base_lr: float = 0.0025
    batch_size: int = 256
    epochs: int = 100
    reference_decay: float = 0.98
    reference_batches_per_epoch: int = DEFAULT_REFERENCE_BATCHES
    seed: int = 0
    mode: TrainMode = TrainMode.JOINT_WEIGHTED
    stop_history_gradient: bool = False

    def __post_init__(self):
        try:
            self.mode = TrainMode(self.mode)
        except ValueError as e:
            raise ConfigurationError(f"Unknown training mode '{self.mode}'") from e
        if self.base_lr <= 0:
            raise ConfigurationError("base_lr must be positive")
        if self.loss_weight_final <= 0 or self.loss_weight_earlier < 0:
            raise ConfigurationError("Loss weights must be non-negative and the final weight positive")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be non-negative")
        if not 0 < self.reference_decay <= 1:
            raise ConfigurationError("reference_decay must lie in (0, 1]")
        if self.reference_batches_per_epoch < 1:
            raise ConfigurationError("reference_batches_per_epoch must be at least 1")

    def loss_weights(self, n_stages: int) -> Tuple[float, ...]:
        """Weight of every output y_0..y_S"""
        earlier = 0.0 if self.mode == TrainMode.FINAL_ONLY else self.loss_weight_earlier
        return tuple([earlier] * n_stages + [self.loss_weight_final])

    def to_dict(self) -> Dict[str, Any]:
        return {"loss_weight_final": self.loss_weight_final,
                "loss_weight_earlier": self.loss_weight_earlier,
                "base_lr": self.base_lr,
                "batch_size": self.batch_size,
                "epochs": self.epochs,
                "reference_decay": self.reference_decay,
                "reference_batches_per_epoch": self.reference_batches_per_epoch,
                "seed": self.seed,
                "mode": self.mode.value,
                "stop_history_gradient": self.stop_history_gradient}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        known = cls().to_dict()
        return cls(**{k: data[k] for k in known if k in data})


def lr_schedule(cfg: TrainConfig, dataset_batches_per_epoch: int) -> float:
    """
    Per-batch learning-rate decay factor

    The factor depends only on the reference dataset, so a smaller dataset
    decays the rate more slowly per epoch. The dataset's own batch count is
    used to log that per-epoch decay.

    Args:
        cfg (TrainConfig): supplies the reference decay and batches per epoch
        dataset_batches_per_epoch (int): batches per epoch of the actual dataset

    Returns:
        float: d with d ** reference_batches_per_epoch == reference_decay; one
        epoch of this dataset decays the rate by d ** dataset_batches_per_epoch
    """
    if dataset_batches_per_epoch < 1 or cfg.reference_batches_per_epoch < 1:
        raise UsageError("Batches per epoch must be at least 1")
    d = cfg.reference_decay ** (1.0 / cfg.reference_batches_per_epoch)
    log.info("Learning rate decays by %.8f per batch, %.5f per epoch of %d batches",
             d, d ** dataset_batches_per_epoch, dataset_batches_per_epoch)
    return d


@dataclass
class SampleSet:
    """Usable training targets plus the series-wide rows their batches are gathered from"""
    targets: np.ndarray
    offsets: np.ndarray
    features: np.ndarray
    actuals: np.ndarray
    first: int
    last: int
    skipped: int = 0

    def __len__(self) -> int:
        return self.targets.shape[0]

    def batch(self, indices) -> TrainBatch:
        return TrainBatch.gather(self.targets[indices], self.offsets, self.features, self.actuals)

    def batches_per_epoch(self, batch_size: int) -> int:
        return math.ceil(len(self) / batch_size)


def build_samples(series: HourlySeries, model_config: ModelConfig, first: int = 0,
                  last: Optional[int] = None, normalizer: Optional[Normalizer] = None) -> SampleSet:
    """
    Collect every usable target hour in series[first..last]

    A target is usable when every hour it depends on (the target itself and
    all residual lags of all stages) has a valid actual and a complete
    temperature window.

    Args:
        series (HourlySeries): source series
        model_config (ModelConfig): determines the dependency offsets
        first (int): first candidate target
        last (int, optional): last candidate target, default the series end
        normalizer (Normalizer, optional): defaults to one fitted on [first, last]

    Returns:
        SampleSet: usable targets and the count of skipped ones

    Raises:
        InsufficientHistoryError: when no target in the range is usable
    """
    n = len(series)
    last = n - 1 if last is None else last
    if not 0 <= first <= last < n:
        raise UsageError(f"Training range [{first}, {last}] outside series of length {n}")
    norm = normalizer if normalizer is not None else Normalizer.fit(series, first, last)

    features, feasible = instant_feature_matrix(series, norm)
    actuals = standardized_actuals(series, norm)
    usable = feasible & np.isfinite(features).all(axis=1) & np.isfinite(actuals)

    offsets = model_config.dependency_offsets()
    ok = usable.copy()
    for d in offsets[1:]:
        ok &= lagged_mask(usable, int(d))

    candidates = np.arange(first, last + 1)
    targets = candidates[ok[first:last + 1]]
    skipped = candidates.shape[0] - targets.shape[0]
    if targets.size == 0:
        anywhere = np.flatnonzero(ok)
        earliest = int(anywhere[0]) if anywhere.size else None
        hint = f"earliest feasible target is {earliest}" if earliest is not None else "no feasible target in the series"
        raise InsufficientHistoryError(
            f"No usable training targets in [{first}, {last}]: each needs "
            f"{model_config.history_hours} hours of valid history; {hint}",
            earliest_target=earliest)
    if skipped:
        log.info("Skipped %d of %d candidate targets for missing history", skipped, candidates.shape[0])
    return SampleSet(targets, offsets, features, actuals, first, last, int(skipped))


def stage_labels(model: SbnModel) -> List[str]:
    return ["instant"] + [stage.kind.value for stage in model.stages]


@dataclass
class TrainResult:
    """Trained model with per-epoch and per-batch loss logs"""
    model: SbnModel
    history: pd.DataFrame
    steps: pd.DataFrame

    def final_losses(self) -> Dict[str, float]:
        """Per-stage training mse of the last epoch"""
        last = self.history.iloc[-1]
        return {c[len("mse_"):]: float(last[c]) for c in self.history.columns
                if c.startswith("mse_") and np.isfinite(last[c])}

    def write_loss_history(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.history.to_csv(path, index=False)
        return path


def _run_phase(model: SbnModel, trainable: List[np.ndarray], select: slice, samples: SampleSet,
               weights: Tuple[float, ...], cfg: TrainConfig, rng: Rng, phase: int,
               labels: List[str], epoch_rows: List[Dict[str, Any]], step_rows: List[Dict[str, Any]]):
    n_batches = samples.batches_per_epoch(cfg.batch_size)
    state = AdamState(base_lr=cfg.base_lr, per_batch_decay=lr_schedule(cfg, n_batches))
    weights_arr = np.asarray(weights)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.shuffle.permutation(len(samples))
        totals = np.zeros(len(weights))
        lr = state.learning_rate()
        for b in range(n_batches):
            indices = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            batch = samples.batch(indices)
            try:
                loss, losses, grads = loss_and_gradients(model, batch, weights, Mode.TRAIN, rng,
                                                         cfg.stop_history_gradient)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(epoch, b, loss)
                lr = state.learning_rate()
                adam_step(trainable, grads[select], state)
            except TrainingDivergedError:
                raise
            except NumericError as e:
                # a stage fed non-finite residuals, or a non-finite gradient
                raise TrainingDivergedError(epoch, b, float("nan")) from e
            totals += losses * len(indices)
            row = {"phase": phase, "epoch": epoch, "batch": b, "size": len(indices), "loss": loss, "lr": lr}
            row.update(_mse_columns(labels, losses))
            step_rows.append(row)
        means = totals / len(samples)
        row = {"phase": phase, "epoch": epoch, "loss": float(np.dot(weights_arr, means)), "lr": lr}
        row.update(_mse_columns(labels, means))
        epoch_rows.append(row)
        log.info("phase %d epoch %d/%d loss %.6f", phase, epoch, cfg.epochs, row["loss"])


def _mse_columns(labels: List[str], losses: np.ndarray) -> Dict[str, float]:
    return {f"mse_{label}": float(losses[i]) if i < len(losses) else np.nan
            for i, label in enumerate(labels)}


def _result(model: SbnModel, labels: List[str], epoch_rows, step_rows) -> TrainResult:
    mse_cols = [f"mse_{label}" for label in labels]
    history = pd.DataFrame(epoch_rows, columns=["phase", "epoch"] + mse_cols + ["loss", "lr"])
    steps = pd.DataFrame(step_rows, columns=["phase", "epoch", "batch", "size"] + mse_cols + ["loss", "lr"])
    return TrainResult(model, history, steps)


def train(model: SbnModel, samples: SampleSet, cfg: TrainConfig) -> TrainResult:
    """
    Train all stage outputs jointly with the weighted loss

    Args:
        model (SbnModel): model to train in place
        samples (SampleSet): training targets
        cfg (TrainConfig): hyperparameters; staged modes are delegated to train_staged

    Returns:
        TrainResult: the trained model and its loss history

    Raises:
        TrainingDivergedError: when a batch loss becomes non-finite
    """
    if cfg.mode.staged:
        return train_staged(model, samples, cfg)
    if len(samples) == 0:
        raise UsageError("Cannot train on an empty sample set")
    rng = make_rng(cfg.seed)
    weights = cfg.loss_weights(len(model.stages))
    labels = stage_labels(model)
    epoch_rows: List[Dict[str, Any]] = []
    step_rows: List[Dict[str, Any]] = []
    log.info("Training %s (%d parameters) on %d samples, mode %s",
             model.config.label, model.parameter_count, len(samples), cfg.mode.value)
    _run_phase(model, model.parameters(), slice(None), samples, weights, cfg, rng, 0,
               labels, epoch_rows, step_rows)
    model.loss_weights = weights
    return _result(model, labels, epoch_rows, step_rows)


def train_staged(model: SbnModel, samples: SampleSet, cfg: TrainConfig) -> TrainResult:
    """
    Train the instant forecaster first, then add boosters one by one

    staged_frozen updates only the newest booster in each phase;
    staged_unfrozen keeps updating every part already present. Any other
    mode is treated as staged_unfrozen.
    """
    if len(samples) == 0:
        raise UsageError("Cannot train on an empty sample set")
    rng = make_rng(cfg.seed)
    labels = stage_labels(model)
    epoch_rows: List[Dict[str, Any]] = []
    step_rows: List[Dict[str, Any]] = []
    frozen = cfg.mode == TrainMode.STAGED_FROZEN
    for phase in range(len(model.stages) + 1):
        sub = model.truncated(phase)
        weights = tuple([0.0] * phase + [cfg.loss_weight_final])
        if frozen:
            trainable = sub.parameter_groups()[phase]
            select = slice(len(sub.parameters()) - len(trainable), None)
        else:
            trainable = sub.parameters()
            select = slice(None)
        log.info("Staged phase %d: %s, %d trainable arrays", phase, sub.config.label, len(trainable))
        _run_phase(sub, trainable, select, samples, weights, cfg, rng, phase,
                   labels, epoch_rows, step_rows)
    model.loss_weights = cfg.loss_weights(len(model.stages))
    return _result(model, labels, epoch_rows, step_rows)
