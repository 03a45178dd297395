# sbn/nn.py

"""
Minimal dense neural-network engine.

Dense layers with linear/relu activations, inverted dropout, mean squared
error, reverse-mode gradients and Adam with a per-batch exponential
learning-rate decay. All arithmetic is float64.

Random streams come from numpy's PCG64 generator seeded through a
SeedSequence; the seed is split into independent child streams
(0 = weight init, 1 = dropout masks, 2 = sample shuffling).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, NumericError, UsageError

LINEAR = "linear"
RELU = "relu"
ACTIVATIONS = (LINEAR, RELU)


class Mode(str, Enum):
    """Forward pass mode; dropout is only active in TRAIN"""
    TRAIN = "train"
    INFER = "infer"


@dataclass
class Rng:
    """Seeded random streams; identical seed gives identical streams"""
    seed: int
    init: np.random.Generator
    dropout: np.random.Generator
    shuffle: np.random.Generator


def make_rng(seed: int) -> Rng:
    """
    Create the independent weight-init, dropout and shuffle sub-streams for a seed

    Args:
        seed (int): 64-bit seed

    Returns:
        Rng: the three PCG64 generators
    """
    children = np.random.SeedSequence(int(seed)).spawn(3)
    init, dropout, shuffle = (np.random.Generator(np.random.PCG64(c)) for c in children)
    return Rng(seed=int(seed), init=init, dropout=dropout, shuffle=shuffle)


@dataclass
class DenseLayer:
    """One affine layer followed by an activation and optional dropout"""
    in_dim: int
    out_dim: int
    activation: str = LINEAR
    dropout_rate: float = 0.0
    weights: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigurationError(f"Layer dims must be positive, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"Unknown activation '{self.activation}'")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"Dropout rate must lie in [0, 1), got {self.dropout_rate}")
        if self.weights is None:
            self.weights = np.zeros((self.out_dim, self.in_dim))
        if self.bias is None:
            self.bias = np.zeros(self.out_dim)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.shape != (self.out_dim, self.in_dim):
            raise ConfigurationError(
                f"Weights shape {self.weights.shape} does not match ({self.out_dim}, {self.in_dim})")
        if self.bias.shape != (self.out_dim,):
            raise ConfigurationError(f"Bias shape {self.bias.shape} does not match ({self.out_dim},)")

    @property
    def parameter_count(self) -> int:
        return self.out_dim * (self.in_dim + 1)

    def parameters(self) -> List[np.ndarray]:
        return [self.weights, self.bias]


@dataclass
class DenseNet:
    """Ordered stack of dense layers; the unit of parameter sharing"""
    layers: List[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ConfigurationError("DenseNet needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise ConfigurationError(
                    f"Layer {i} outputs {a.out_dim} values but layer {i + 1} expects {b.in_dim}")

    @classmethod
    def mlp(cls, sizes: Sequence[int], dropout_rate: float = 0.0) -> "DenseNet":
        """
        Build a net with relu+dropout hidden layers and a linear output layer

        Args:
            sizes (Sequence[int]): layer widths, input first, e.g. (5, 32, 1)
            dropout_rate (float): dropout applied to every hidden layer output
        """
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
            hidden = i < len(sizes) - 2
            layers.append(DenseLayer(n_in, n_out,
                                     activation=RELU if hidden else LINEAR,
                                     dropout_rate=dropout_rate if hidden else 0.0))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in documented order: W0, b0, W1, b1, ..."""
        params = []
        for layer in self.layers:
            params.extend(layer.parameters())
        return params

    def shapes(self) -> Tuple[Tuple[int, int], ...]:
        return tuple((layer.out_dim, layer.in_dim) for layer in self.layers)

    def copy(self) -> "DenseNet":
        return DenseNet([DenseLayer(l.in_dim, l.out_dim, l.activation, l.dropout_rate,
                                    l.weights.copy(), l.bias.copy()) for l in self.layers])


@dataclass
class ForwardCache:
    """Per-layer inputs, pre-activations and dropout masks of one forward pass"""
    shapes: Tuple[Tuple[int, int], ...]
    inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    masks: List[Optional[np.ndarray]] = field(default_factory=list)
    squeeze: bool = False


def dense_forward(net: DenseNet, x, mode: Mode = Mode.INFER,
                  rng: Optional[Rng] = None) -> Tuple[np.ndarray, ForwardCache]:
    """
    Run a dense net on a vector or a (batch x in_dim) matrix

    Args:
        net (DenseNet): the network
        x: input vector or matrix
        mode (Mode): TRAIN applies inverted dropout, INFER is deterministic
        rng (Rng, optional): random streams, required for TRAIN with dropout

    Returns:
        Tuple[np.ndarray, ForwardCache]: output (same rank as x) and the cache for dense_backward
    """
    a = np.asarray(x, dtype=np.float64)
    squeeze = a.ndim == 1
    if squeeze:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != net.in_dim:
        raise ConfigurationError(f"Input shape {np.shape(x)} does not match net input dim {net.in_dim}")
    if not np.all(np.isfinite(a)):
        raise NumericError("Non-finite value in network input")

    cache = ForwardCache(shapes=net.shapes(), squeeze=squeeze)
    for layer in net.layers:
        cache.inputs.append(a)
        z = a @ layer.weights.T + layer.bias
        cache.pre_activations.append(z)
        a = np.maximum(z, 0.0) if layer.activation == RELU else z
        mask = None
        if mode == Mode.TRAIN and layer.dropout_rate > 0.0:
            if rng is None:
                raise UsageError("Training-mode forward pass with dropout needs an Rng")
            keep = 1.0 - layer.dropout_rate
            mask = (rng.dropout.random(a.shape) < keep) / keep
            a = a * mask
        cache.masks.append(mask)
    return (a[0] if squeeze else a), cache


def dense_backward(net: DenseNet, cache: ForwardCache, dy) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Reverse-mode pass through a dense net

    Args:
        net (DenseNet): the network used for the forward pass
        cache (ForwardCache): cache returned by dense_forward
        dy: gradient of the objective with respect to the net output

    Returns:
        Tuple[np.ndarray, List[np.ndarray]]: gradient w.r.t. the input and
        gradients in the order of net.parameters()
    """
    if cache.shapes != net.shapes():
        raise ConfigurationError("Forward cache was produced by a different network shape")
    g = np.asarray(dy, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    if g.shape != cache.pre_activations[-1].shape:
        raise ConfigurationError(f"Output gradient shape {np.shape(dy)} does not match the forward output")

    grads: List[np.ndarray] = [None] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if cache.masks[i] is not None:
            g = g * cache.masks[i]
        if layer.activation == RELU:
            g = g * (cache.pre_activations[i] > 0.0)
        grads[2 * i] = g.T @ cache.inputs[i]
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ layer.weights
    return (g[0] if cache.squeeze else g), grads


def init_glorot(net: DenseNet, rng: Rng) -> DenseNet:
    """Glorot-uniform weights from the init stream, zero biases (in place)"""
    for layer in net.layers:
        limit = np.sqrt(6.0 / (layer.in_dim + layer.out_dim))
        layer.weights[...] = rng.init.uniform(-limit, limit, size=layer.weights.shape)
        layer.bias[...] = 0.0
    return net


@dataclass
class AdamState:
    """Adam accumulators plus the per-batch exponential learning-rate decay"""
    base_lr: float = 0.0025
    per_batch_decay: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ConfigurationError(f"Learning rate must be positive, got {self.base_lr}")
        if not 0.0 < self.per_batch_decay <= 1.0:
            raise ConfigurationError(f"Per-batch decay must lie in (0, 1], got {self.per_batch_decay}")

    def learning_rate(self, step: Optional[int] = None) -> float:
        """Effective learning rate after `step` batches (defaults to the current count)"""
        b = self.t if step is None else step
        return self.base_lr * self.per_batch_decay ** b


def adam_step(params: List[np.ndarray], grads: List[np.ndarray],
              state: AdamState) -> Tuple[List[np.ndarray], AdamState]:
    """
    One bias-corrected Adam update, applied in place

    Args:
        params (List[np.ndarray]): parameter arrays, updated in place
        grads (List[np.ndarray]): gradients with matching shapes
        state (AdamState): optimizer state; moments are created on first use

    Returns:
        Tuple[List[np.ndarray], AdamState]: the updated parameters and state
    """
    if len(params) != len(grads):
        raise ConfigurationError(f"{len(params)} parameter arrays but {len(grads)} gradients")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericError("Non-finite gradient; parameters left unchanged")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise ConfigurationError("Adam state does not match the parameter list")

    lr = state.learning_rate()
    t = state.t + 1
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
    state.t = t
    return params, state


def mse(pred, target) -> float:
    """Mean of squared differences"""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise UsageError(f"Shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise UsageError("mse of empty vectors is undefined")
    return float(np.mean((pred - target) ** 2))
