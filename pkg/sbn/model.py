# sbn/model.py

"""
Stacked booster network: an instant forecaster plus booster stages.

The instant forecaster reduces the 12-hour temperature window to one value
with a linear 12->1 layer and feeds it, with the day-type and hour
encodings, through a 5->32->1 dense head. Each booster stage is an
n->32->1 net that estimates the previous stage's residual from a window of
that stage's past residuals at a fixed period (168 h, 24 h or 1 h).

Booster input counts follow the architecture table: a single booster uses
its standalone length (weekly 3, daily 7, hourly 24); in a stack the weekly
booster uses 2 and the daily booster 6, the hourly booster keeps 24.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, UsageError
from .features import FEATURE_DIM, TEMP_WINDOW, InstantFeatures, Normalizer, StageKind
from .nn import (LINEAR, DenseLayer, DenseNet, ForwardCache, Mode, Rng,
                 dense_backward, dense_forward, init_glorot, make_rng)

STACK_ORDER = (StageKind.WEEKLY, StageKind.DAILY, StageKind.HOURLY)
STANDALONE_INPUTS = {StageKind.WEEKLY: 3, StageKind.DAILY: 7, StageKind.HOURLY: 24}
STACKED_INPUTS = {StageKind.WEEKLY: 2, StageKind.DAILY: 6, StageKind.HOURLY: 24}


def parse_boosters(text: Union[str, Sequence[Any], None]) -> Tuple[StageKind, ...]:
    """Parse 'weekly,daily,hourly' (or 'none' / '') into stage kinds"""
    if text is None:
        return ()
    if isinstance(text, str):
        names = [t.strip().lower() for t in text.split(",") if t.strip()]
    else:
        names = [str(getattr(t, "value", t)).strip().lower() for t in text]
    if names in (["none"], ["instant"]):
        return ()
    try:
        return tuple(StageKind(name) for name in names)
    except ValueError as e:
        raise UsageError(f"Unknown booster in '{text}': {e}") from e


@dataclass
class ModelConfig:
    """Shape of an SBN instance"""
    boosters: Tuple[StageKind, ...] = STACK_ORDER
    hidden_units: int = 32
    dropout_rate: float = 0.2
    n_inputs: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.boosters = parse_boosters(self.boosters)
        if len(set(self.boosters)) != len(self.boosters):
            raise ConfigurationError(f"Duplicate booster in {self.boosters}")
        order = [STACK_ORDER.index(kind) for kind in self.boosters]
        if order != sorted(order):
            raise ConfigurationError("Boosters must be stacked in the order weekly, daily, hourly")
        if self.hidden_units < 1:
            raise ConfigurationError("hidden_units must be positive")
        self.n_inputs = {StageKind(k).value: int(v) for k, v in (self.n_inputs or {}).items()}
        for kind, n in self.n_inputs.items():
            if n < 1:
                raise ConfigurationError(f"n_inputs for {kind} must be positive")

    @property
    def label(self) -> str:
        return "+".join(kind.value for kind in self.boosters) if self.boosters else "instant"

    def effective_inputs(self) -> Tuple[int, ...]:
        """Input count of every stage in stacking order"""
        table = STANDALONE_INPUTS if len(self.boosters) == 1 else STACKED_INPUTS
        return tuple(self.n_inputs.get(kind.value, table[kind]) for kind in self.boosters)

    @property
    def lag_depth(self) -> int:
        """Oldest residual lag a target depends on, in hours"""
        return sum(kind.period * n for kind, n in zip(self.boosters, self.effective_inputs()))

    @property
    def history_hours(self) -> int:
        """Hours of history needed before the first usable target"""
        return self.lag_depth + TEMP_WINDOW

    def stage_lags(self) -> List[np.ndarray]:
        """Positive lag offsets of every stage, oldest first"""
        return [kind.period * np.arange(n, 0, -1) for kind, n in zip(self.boosters, self.effective_inputs())]

    def dependency_offsets(self) -> np.ndarray:
        """Sorted offsets o >= 0 such that target t depends on the instant forecast and actual at t - o"""
        offsets = np.zeros(1, dtype=np.int64)
        for lags in reversed(self.stage_lags()):
            offsets = np.union1d(offsets, (offsets[:, None] + lags[None, :]).ravel())
        return offsets

    def to_dict(self) -> Dict[str, Any]:
        return {"boosters": [kind.value for kind in self.boosters],
                "hidden_units": self.hidden_units,
                "dropout_rate": self.dropout_rate,
                "n_inputs": dict(self.n_inputs)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        return cls(boosters=tuple(data.get("boosters", ())),
                   hidden_units=int(data.get("hidden_units", 32)),
                   dropout_rate=float(data.get("dropout_rate", 0.2)),
                   n_inputs=dict(data.get("n_inputs", {})))


@dataclass
class InstantForecaster:
    """Linear temperature reducer plus the shared dense head"""
    temp_reducer: DenseNet
    head: DenseNet

    @classmethod
    def create(cls, hidden_units: int = 32, dropout_rate: float = 0.2) -> "InstantForecaster":
        reducer = DenseNet([DenseLayer(TEMP_WINDOW, 1, activation=LINEAR)])
        head = DenseNet.mlp((1 + FEATURE_DIM - TEMP_WINDOW, hidden_units, 1), dropout_rate=dropout_rate)
        return cls(reducer, head)

    @property
    def parameter_count(self) -> int:
        return self.temp_reducer.parameter_count + self.head.parameter_count

    @property
    def layer_count(self) -> int:
        return len(self.temp_reducer.layers) + len(self.head.layers)

    def nets(self) -> List[DenseNet]:
        return [self.temp_reducer, self.head]

    def parameters(self) -> List[np.ndarray]:
        return self.temp_reducer.parameters() + self.head.parameters()


@dataclass
class BoosterStage:
    """Residual estimator over a periodic window of the previous stage's residuals"""
    kind: StageKind
    n_inputs: int
    net: DenseNet

    def __post_init__(self):
        self.kind = StageKind(self.kind)
        if self.net.in_dim != self.n_inputs or self.net.out_dim != 1:
            raise ConfigurationError(
                f"{self.kind.value} stage net is {self.net.in_dim}->{self.net.out_dim}, expected {self.n_inputs}->1")

    @property
    def period(self) -> int:
        return self.kind.period

    @property
    def lags(self) -> np.ndarray:
        """Positive lag offsets, oldest first"""
        return self.period * np.arange(self.n_inputs, 0, -1)

    @property
    def parameter_count(self) -> int:
        return self.net.parameter_count


@dataclass
class StageOutputs:
    """
    Per-stage forecasts y_0..y_S and corrections e_1..e_S.

    forecasts[s] = forecasts[s-1] - corrections[s-1]; arrays may carry a
    trailing batch axis.
    """
    forecasts: np.ndarray
    corrections: np.ndarray
    hour: Optional[int] = None
    timestamp: Any = None
    actual: Optional[float] = None

    @property
    def final(self):
        return self.forecasts[-1]


@dataclass
class SbnModel:
    """Trained artifact: instant forecaster, stages in stacking order, normalizer"""
    config: ModelConfig
    instant: InstantForecaster
    stages: List[BoosterStage]
    normalizer: Optional[Normalizer] = None
    loss_weights: Optional[Tuple[float, ...]] = None

    @property
    def parameter_count(self) -> int:
        return self.instant.parameter_count + sum(stage.parameter_count for stage in self.stages)

    @property
    def layer_count(self) -> int:
        """Trainable layers along the deepest path"""
        return self.instant.layer_count + sum(len(stage.net.layers) for stage in self.stages)

    @property
    def n_outputs(self) -> int:
        return 1 + len(self.stages)

    def nets(self) -> List[DenseNet]:
        return self.instant.nets() + [stage.net for stage in self.stages]

    def parameter_groups(self) -> List[List[np.ndarray]]:
        """Parameter arrays grouped as [instant, stage 1, ..., stage S]"""
        return [self.instant.parameters()] + [stage.net.parameters() for stage in self.stages]

    def parameters(self) -> List[np.ndarray]:
        return [p for group in self.parameter_groups() for p in group]

    def truncated(self, n_stages: int) -> "SbnModel":
        """View on the instant forecaster and the first n_stages stages (weights shared)"""
        if not 0 <= n_stages <= len(self.stages):
            raise UsageError(f"Cannot truncate {len(self.stages)} stages to {n_stages}")
        config = ModelConfig(self.config.boosters[:n_stages], self.config.hidden_units,
                             self.config.dropout_rate,
                             {s.kind.value: s.n_inputs for s in self.stages[:n_stages]})
        return SbnModel(config, self.instant, self.stages[:n_stages], self.normalizer)

    def copy(self) -> "SbnModel":
        instant = InstantForecaster(self.instant.temp_reducer.copy(), self.instant.head.copy())
        stages = [BoosterStage(s.kind, s.n_inputs, s.net.copy()) for s in self.stages]
        return SbnModel(self.config, instant, stages, self.normalizer, self.loss_weights)


def build_model(config: ModelConfig, seed: int = 0,
                normalizer: Optional[Normalizer] = None) -> SbnModel:
    """Construct an SBN instance with Glorot-initialized weights"""
    rng = make_rng(seed)
    instant = InstantForecaster.create(config.hidden_units, config.dropout_rate)
    stages = [BoosterStage(kind, n, DenseNet.mlp((n, config.hidden_units, 1), config.dropout_rate))
              for kind, n in zip(config.boosters, config.effective_inputs())]
    model = SbnModel(config, instant, stages, normalizer)
    for net in model.nets():
        init_glorot(net, rng)
    return model


InstantCache = Tuple[ForwardCache, ForwardCache]


def instant_batch_forward(instant: InstantForecaster, features: np.ndarray, mode: Mode = Mode.INFER,
                          rng: Optional[Rng] = None) -> Tuple[np.ndarray, InstantCache]:
    """Instant forecasts for a (batch x 16) feature matrix"""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != FEATURE_DIM:
        raise ConfigurationError(f"Instant features must be (batch, {FEATURE_DIM}), got {features.shape}")
    reduced, reducer_cache = dense_forward(instant.temp_reducer, features[:, :TEMP_WINDOW], mode, rng)
    head_in = np.concatenate([reduced, features[:, TEMP_WINDOW:]], axis=1)
    y, head_cache = dense_forward(instant.head, head_in, mode, rng)
    return y[:, 0], (reducer_cache, head_cache)


def instant_batch_backward(instant: InstantForecaster, cache: InstantCache,
                           dy: np.ndarray) -> List[np.ndarray]:
    """Gradients of the instant forecaster parameters, in InstantForecaster.parameters() order"""
    reducer_cache, head_cache = cache
    d_head_in, head_grads = dense_backward(instant.head, head_cache, np.asarray(dy)[:, None])
    _, reducer_grads = dense_backward(instant.temp_reducer, reducer_cache, d_head_in[:, :1])
    return reducer_grads + head_grads


def instant_forward(model: SbnModel, features: Union[InstantFeatures, np.ndarray],
                    mode: Mode = Mode.INFER, rng: Optional[Rng] = None) -> float:
    """Standardized instant forecast for one hour"""
    if isinstance(features, InstantFeatures):
        features = features.as_vector()
    y, _ = instant_batch_forward(model.instant, np.asarray(features, dtype=np.float64)[None, :], mode, rng)
    return float(y[0])


def stage_forward(stage: BoosterStage, residual_window, mode: Mode = Mode.INFER,
                  rng: Optional[Rng] = None) -> float:
    """Residual estimate of one stage from its window (oldest first)"""
    window = np.asarray(residual_window, dtype=np.float64)
    if window.shape != (stage.n_inputs,):
        raise ConfigurationError(
            f"{stage.kind.value} stage expects {stage.n_inputs} residuals, got shape {window.shape}")
    y, _ = dense_forward(stage.net, window, mode, rng)
    return float(y[0])
