"""Feed-forward model runtime with single-sample online training.

A model is a chain of dense layers with a frozen prefix and a trainable
suffix. Inference and training interleave one sample at a time: each
labelled sample triggers one plain gradient-descent step on the suffix
(metrics update first, then weights), after which the sample can be
discarded. Autoencoder models (output dim == input dim, mse loss)
expose a reconstruction-error anomaly score.

All math is float64 numpy. A (Model, Trainer, Metrics) triple is a
single-threaded unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError, FrozenOnlyModelError, InvariantViolationError,
    ModelFormatError, NotAutoencoderError,
)

ACTIVATIONS = ("linear", "relu", "sigmoid", "softmax")
LOSSES = ("mse", "cross_entropy")

FILE_FORMAT = "edgecep-model/1"


@dataclass(eq=False)
class Layer:
    in_dim: int
    out_dim: int
    weights: np.ndarray         # (out_dim, in_dim)
    bias: np.ndarray            # (out_dim,)
    activation: str = "linear"
    kind: str = "dense"


@dataclass(eq=False)
class Model:
    model_id: str
    layers: list[Layer]
    frozen_count: int = 0
    loss: str = "mse"
    mean: np.ndarray = None
    std: np.ndarray = None
    init_seed: int | None = None

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.layers[0].in_dim)
        if self.std is None:
            self.std = np.ones(self.layers[0].in_dim)
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        validate_model(self)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def is_autoencoder(self) -> bool:
        return self.loss == "mse" and self.in_dim == self.out_dim


@dataclass
class Trainer:
    learning_rate: float = 0.01
    step_count: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvariantViolationError("learning_rate must be > 0")


@dataclass
class Metrics:
    running_loss_mean: float = 0.0
    sample_count: int = 0
    running_accuracy: float = 0.0

    def update(self, loss: float, correct: bool | None):
        self.sample_count += 1
        self.running_loss_mean += (
            (loss - self.running_loss_mean) / self.sample_count)
        if correct is not None:
            self.running_accuracy += (
                (float(correct) - self.running_accuracy) / self.sample_count)


def validate_model(m: Model):
    if not m.layers:
        raise InvariantViolationError("model needs at least one layer")
    if not 0 <= m.frozen_count <= len(m.layers):
        raise InvariantViolationError(
            f"frozen_count {m.frozen_count} outside [0, {len(m.layers)}]")
    if m.loss not in LOSSES:
        raise InvariantViolationError(f"unknown loss {m.loss!r}")
    prev = None
    for i, layer in enumerate(m.layers):
        if layer.kind != "dense":
            raise InvariantViolationError(
                f"layer {i}: unsupported kind {layer.kind!r}")
        if layer.activation not in ACTIVATIONS:
            raise InvariantViolationError(
                f"layer {i}: unknown activation {layer.activation!r}")
        if layer.activation == "softmax" and i != len(m.layers) - 1:
            raise InvariantViolationError(
                f"layer {i}: softmax is only valid on the final layer")
        if layer.weights.shape != (layer.out_dim, layer.in_dim):
            raise InvariantViolationError(
                f"layer {i}: weight shape {layer.weights.shape} != "
                f"({layer.out_dim}, {layer.in_dim})")
        if layer.bias.shape != (layer.out_dim,):
            raise InvariantViolationError(
                f"layer {i}: bias shape {layer.bias.shape}")
        if prev is not None and layer.in_dim != prev:
            raise InvariantViolationError(
                f"layer {i}: in_dim {layer.in_dim} breaks the chain "
                f"(previous out_dim {prev})")
        if not (np.isfinite(layer.weights).all()
                and np.isfinite(layer.bias).all()):
            raise InvariantViolationError(f"layer {i}: non-finite weights")
        prev = layer.out_dim
    if m.mean.shape != (m.layers[0].in_dim,):
        raise InvariantViolationError("preprocess mean length mismatch")
    if m.std.shape != (m.layers[0].in_dim,):
        raise InvariantViolationError("preprocess std length mismatch")
    if (m.std <= 0).any():
        raise InvariantViolationError("preprocess std entries must be > 0")
    last = m.layers[-1].activation
    if m.loss == "cross_entropy" and last != "softmax":
        raise InvariantViolationError(
            "cross_entropy requires a softmax output layer")
    if last == "softmax" and m.loss != "cross_entropy":
        raise InvariantViolationError(
            "softmax output requires the cross_entropy loss")


def init_layer(in_dim: int, out_dim: int, activation: str,
               rng: np.random.Generator) -> Layer:
    """Fresh trainable layer: uniform weights in [-0.5, 0.5]."""
    return Layer(in_dim, out_dim,
                 rng.uniform(-0.5, 0.5, size=(out_dim, in_dim)),
                 rng.uniform(-0.5, 0.5, size=out_dim),
                 activation)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "linear":
        return z
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    # softmax, numerically shifted
    e = np.exp(z - z.max())
    return e / e.sum()


def _activate_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "linear":
        return np.ones_like(z)
    if kind == "relu":
        return (z > 0).astype(float)
    if kind == "sigmoid":
        return a * (1.0 - a)
    raise InvariantViolationError(
        "softmax gradient is fused with cross_entropy")


def preprocess(m: Model, x) -> np.ndarray:
    """Standardize one input vector: (x - mean) / std."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.in_dim,):
        raise DimensionMismatchError(
            f"input length {x.shape} != ({m.in_dim},)")
    return (x - m.mean) / m.std


def _forward(m: Model, x) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Returns (pre-activations per layer, activations incl. input)."""
    a = preprocess(m, x)
    acts = [a]
    zs = []
    for layer in m.layers:
        z = layer.weights @ a + layer.bias
        a = _activate(z, layer.activation)
        zs.append(z)
        acts.append(a)
    return zs, acts


def infer(m: Model, x) -> np.ndarray:
    """Forward pass (after preprocessing); pure."""
    _, acts = _forward(m, x)
    return acts[-1]


def _loss_and_delta(m: Model, y_pred: np.ndarray, y_true: np.ndarray,
                    z_last: np.ndarray):
    """Per-sample loss and the gradient at the last pre-activation."""
    if m.loss == "mse":
        diff = y_pred - y_true
        loss = float(np.mean(diff * diff))
        d_a = 2.0 * diff / y_pred.size
        dz = d_a * _activate_grad(z_last, y_pred,
                                  m.layers[-1].activation)
        return loss, dz
    # cross_entropy with softmax output: dz collapses to p - y
    p = np.clip(y_pred, 1e-300, None)
    loss = float(-np.sum(y_true * np.log(p)))
    return loss, y_pred - y_true


def train_step(m: Model, trainer: Trainer, metrics: Metrics, x, y_true):
    """One interleaved inference + online-gradient-descent update.

    Backpropagates through the trainable suffix only; the frozen prefix
    is never touched. Returns (y_pred, loss).
    """
    if m.frozen_count == len(m.layers):
        raise FrozenOnlyModelError(
            f"model {m.model_id!r} has no trainable layers")
    y_true = np.asarray(y_true, dtype=float)
    if y_true.shape != (m.out_dim,):
        raise DimensionMismatchError(
            f"label length {y_true.shape} != ({m.out_dim},)")
    zs, acts = _forward(m, x)
    y_pred = acts[-1]
    loss, dz = _loss_and_delta(m, y_pred, y_true, zs[-1])

    correct = None
    if m.loss == "cross_entropy":
        correct = int(np.argmax(y_pred)) == int(np.argmax(y_true))
    metrics.update(loss, correct)

    grads = []
    for idx in range(len(m.layers) - 1, m.frozen_count - 1, -1):
        layer = m.layers[idx]
        grads.append((idx, np.outer(dz, acts[idx]), dz.copy()))
        if idx > m.frozen_count:
            d_a = layer.weights.T @ dz
            below = m.layers[idx - 1]
            dz = d_a * _activate_grad(zs[idx - 1], acts[idx],
                                      below.activation)
    lr = trainer.learning_rate
    for idx, d_w, d_b in grads:
        m.layers[idx].weights -= lr * d_w
        m.layers[idx].bias -= lr * d_b
    trainer.step_count += 1
    return y_pred, loss


def anomaly_score(m: Model, x) -> float:
    """Mean squared reconstruction error of an autoencoder on one input."""
    if not m.is_autoencoder:
        raise NotAutoencoderError(
            f"model {m.model_id!r}: output dim {m.out_dim} != input dim "
            f"{m.in_dim} (or loss is not mse)")
    target = preprocess(m, x)
    recon = infer(m, x)
    diff = recon - target
    return float(np.mean(diff * diff))


# -- persistence ---------------------------------------------------------

def save_model(m: Model) -> bytes:
    doc = {
        "format": FILE_FORMAT,
        "model_id": m.model_id,
        "loss": m.loss,
        "frozen_count": m.frozen_count,
        "init_seed": m.init_seed,
        "preprocess": {
            "mean": list(m.mean),
            "std": list(m.std),
        },
        "layers": [
            {
                "kind": layer.kind,
                "in_dim": layer.in_dim,
                "out_dim": layer.out_dim,
                "activation": layer.activation,
                "weights": [float(v) for v in layer.weights.ravel()],
                "bias": [float(v) for v in layer.bias],
            }
            for layer in m.layers
        ],
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def _want(doc: dict, path: str, key: str, kind):
    if key not in doc:
        raise ModelFormatError(f"{path}.{key}", "missing field")
    value = doc[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ModelFormatError(f"{path}.{key}", "expected a number")
        return float(value)
    if kind is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ModelFormatError(f"{path}.{key}", "expected an integer")
        return value
    if not isinstance(value, kind):
        raise ModelFormatError(
            f"{path}.{key}", f"expected {kind.__name__}")
    return value


def _float_list(doc, path, key):
    raw = _want(doc, path, key, list)
    out = []
    for i, v in enumerate(raw):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ModelFormatError(f"{path}.{key}[{i}]",
                                   "expected a number")
        out.append(float(v))
    return np.array(out, dtype=float)


def load_model(data: bytes | str) -> Model:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ModelFormatError("$", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("$", "expected a JSON object")
    if doc.get("format") != FILE_FORMAT:
        raise ModelFormatError("$.format",
                               f"expected {FILE_FORMAT!r}")
    model_id = _want(doc, "$", "model_id", str)
    loss = _want(doc, "$", "loss", str)
    frozen = _want(doc, "$", "frozen_count", int)
    init_seed = doc.get("init_seed")
    if init_seed is not None and not isinstance(init_seed, int):
        raise ModelFormatError("$.init_seed", "expected integer or null")
    pre = _want(doc, "$", "preprocess", dict)
    mean = _float_list(pre, "$.preprocess", "mean")
    std = _float_list(pre, "$.preprocess", "std")
    raw_layers = _want(doc, "$", "layers", list)
    layers = []
    for i, raw in enumerate(raw_layers):
        path = f"$.layers[{i}]"
        if not isinstance(raw, dict):
            raise ModelFormatError(path, "expected a JSON object")
        kind = _want(raw, path, "kind", str)
        in_dim = _want(raw, path, "in_dim", int)
        out_dim = _want(raw, path, "out_dim", int)
        activation = _want(raw, path, "activation", str)
        weights = _float_list(raw, path, "weights")
        bias = _float_list(raw, path, "bias")
        if in_dim < 1 or out_dim < 1:
            raise InvariantViolationError(f"{path}: non-positive dims")
        if weights.size != in_dim * out_dim:
            raise InvariantViolationError(
                f"{path}: {weights.size} weights for a "
                f"{out_dim}x{in_dim} layer")
        layers.append(Layer(in_dim, out_dim,
                            weights.reshape(out_dim, in_dim), bias,
                            activation, kind))
    return Model(model_id, layers, frozen_count=frozen, loss=loss,
                 mean=mean, std=std, init_seed=init_seed)


# -- pool ----------------------------------------------------------------

@dataclass(eq=False)
class PoolEntry:
    model: Model
    trainer: Trainer = field(default_factory=Trainer)
    metrics: Metrics = field(default_factory=Metrics)


class ModelPool:
    """The hosting pool: model_id -> (Model, Trainer, Metrics)."""

    def __init__(self):
        self._entries: dict[str, PoolEntry] = {}

    def add(self, model: Model, trainer: Trainer | None = None) -> PoolEntry:
        if model.model_id in self._entries:
            raise InvariantViolationError(
                f"model id {model.model_id!r} already in pool")
        entry = PoolEntry(model, trainer or Trainer())
        self._entries[model.model_id] = entry
        return entry

    def get(self, model_id: str) -> PoolEntry | None:
        return self._entries.get(model_id)

    def ids(self) -> list[str]:
        return list(self._entries)

    def __contains__(self, model_id: str) -> bool:
        return model_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)
