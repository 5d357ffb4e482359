"""Small feed-forward softmax classifier: init, forward, gradients, SGD.

The numeric work is delegated to the kernel backend (compiled when
available, pure Python otherwise); both backends produce bit-identical
results, so everything here is deterministic given the configs and data.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel as kernel
from .errors import ConfigError, DataError, DivergenceError, ShapeError
from .rng import SplitMix64, derive_seed

ACTIVATIONS = ("relu", "tanh")
INIT_SCHEMES = ("kaiming", "xavier")

_ACT_CODES = {"relu": kernel.ACT_RELU, "tanh": kernel.ACT_TANH}


@dataclass(frozen=True)
class ModelConfig:
    """Architecture plus the seed its initial weights are drawn from."""

    input_dim: int
    hidden_layers: tuple[int, ...]
    output_dim: int
    activation: str = "relu"
    init_scheme: str = "kaiming"
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(self.hidden_layers))
        if self.input_dim < 1:
            raise ConfigError("input_dim must be >= 1")
        if self.output_dim < 2:
            raise ConfigError("output_dim must be >= 2")
        if any(w < 1 for w in self.hidden_layers):
            raise ConfigError("every hidden layer width must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ConfigError(f"init_scheme must be one of {INIT_SCHEMES}")

    @property
    def layer_widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_layers, self.output_dim)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_layers": list(self.hidden_layers),
            "output_dim": self.output_dim,
            "activation": self.activation,
            "init_scheme": self.init_scheme,
            "init_seed": self.init_seed,
        }


@dataclass(frozen=True)
class TrainConfig:
    """SGD schedule plus the seed that drives per-epoch shuffling."""

    epochs: int
    batch_size: int
    learning_rate: float
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "shuffle_seed": self.shuffle_seed,
        }


@dataclass
class Parameters:
    """Trained or initial weights/biases, tied to the config that shaped them."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: ModelConfig

    def __post_init__(self):
        widths = self.config.layer_widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ShapeError("layer count does not match the architecture")
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (widths[layer + 1], widths[layer]):
                raise ShapeError(
                    f"layer {layer} weight is {w.shape}, expected "
                    f"{(widths[layer + 1], widths[layer])}"
                )
            if b.shape != (widths[layer + 1],):
                raise ShapeError(f"layer {layer} bias is {b.shape}")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Parameters":
        return Parameters(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.config,
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )

    def same_values(self, other: "Parameters") -> bool:
        """Bitwise equality of every weight and bias."""
        return (
            self.n_layers == other.n_layers
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


@dataclass
class ParamGrads:
    """Parameter-shaped gradient container returned by backward()."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_parameters(config: ModelConfig) -> Parameters:
    """Draw initial weights per the configured scheme; biases start at zero."""
    widths = config.layer_widths
    weights = []
    biases = []
    for layer in range(len(widths) - 1):
        fan_in = widths[layer]
        fan_out = widths[layer + 1]
        gen = SplitMix64(derive_seed(config.init_seed, "init", layer))
        w = np.empty((fan_out, fan_in), dtype=np.float64)
        flat = w.reshape(-1)
        if config.init_scheme == "kaiming":
            std = np.sqrt(2.0 / fan_in)
            for i in range(flat.size):
                flat[i] = gen.normal() * std
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            for i in range(flat.size):
                flat[i] = (gen.uniform() * 2.0 - 1.0) * limit
        weights.append(w)
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return Parameters(weights, biases, config)


def _check_inputs(params: Parameters, inputs: np.ndarray) -> np.ndarray:
    inputs = np.ascontiguousarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise ShapeError(f"inputs must be 2-D, got {inputs.ndim}-D")
    if inputs.shape[0] == 0:
        raise DataError("empty input batch")
    if inputs.shape[1] != params.config.input_dim:
        raise ShapeError(
            f"inputs have {inputs.shape[1]} features, model expects "
            f"{params.config.input_dim}"
        )
    return inputs


def forward(params: Parameters, inputs: np.ndarray) -> np.ndarray:
    """Per-sample class-probability rows (softmax of the final logits)."""
    inputs = _check_inputs(params, inputs)
    return kernel.forward(
        params.weights, params.biases, inputs, _ACT_CODES[params.config.activation]
    )


def loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-probability of the true class."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise ShapeError("probs rows must match labels length")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise DataError("label out of range")
    with np.errstate(divide="ignore"):
        return float(np.mean(-np.log(probs[np.arange(len(labels)), labels])))


def backward(
    params: Parameters, inputs: np.ndarray, labels: np.ndarray
) -> tuple[ParamGrads, np.ndarray]:
    """Exact gradients of the mean cross-entropy w.r.t. parameters and inputs."""
    inputs = _check_inputs(params, inputs)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.shape != (inputs.shape[0],):
        raise ShapeError("labels must be one class index per input row")
    if labels.min() < 0 or labels.max() >= params.config.output_dim:
        raise DataError("label out of range")
    gws, gbs, gx = kernel.backward(
        params.weights,
        params.biases,
        inputs,
        labels,
        _ACT_CODES[params.config.activation],
        True,
    )
    return ParamGrads(gws, gbs), gx


def train(
    x: np.ndarray,
    y: np.ndarray,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> Parameters:
    """Mini-batch SGD from a fresh init; deterministic given configs and data."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if x.ndim != 2:
        raise ShapeError("training inputs must be 2-D")
    if y.shape != (x.shape[0],):
        raise ShapeError("training labels must be one class index per row")
    if x.shape[0] == 0:
        raise DataError("empty training set")
    if x.shape[1] != model_config.input_dim:
        raise ShapeError(
            f"training inputs have {x.shape[1]} features, model expects "
            f"{model_config.input_dim}"
        )
    if y.min() < 0 or y.max() >= model_config.output_dim:
        raise DataError("training label out of range")
    if train_config.batch_size > x.shape[0]:
        raise ConfigError(
            f"batch_size {train_config.batch_size} exceeds training-set size "
            f"{x.shape[0]}"
        )

    params = init_parameters(model_config)
    seeds = np.array(
        [
            derive_seed(train_config.shuffle_seed, "shuffle", epoch)
            for epoch in range(train_config.epochs)
        ],
        dtype=np.uint64,
    ).view(np.int64)

    status = kernel.train_sgd(
        params.weights,
        params.biases,
        x,
        y,
        _ACT_CODES[model_config.activation],
        seeds,
        train_config.batch_size,
        train_config.learning_rate,
    )
    if status >= 0:
        raise DivergenceError(status)
    if not params.all_finite():
        raise DivergenceError(train_config.epochs - 1, "non-finite weights after training")
    return params


def predict(params: Parameters, inputs: np.ndarray) -> np.ndarray:
    """Per-row argmax of forward probabilities; ties go to the lowest class."""
    return np.argmax(forward(params, inputs), axis=1)
