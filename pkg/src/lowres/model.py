"""Small differentiable classifiers with closed-form gradients.

Two families share one flat parameter vector layout:

* ``logistic``: ``logits = x W + b``
* ``mlp``: ``logits = tanh(x W1 + b1) W2 + b2``

Dropout (inverted Bernoulli mask) acts on the hidden activations of the MLP
and on the inputs of the logistic model. It is only active in ``train`` mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .numerics import Rng, log_softmax, softmax

KINDS = ("logistic", "mlp")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    input_dim: int
    num_classes: int
    hidden_dim: int = 0
    activation: str = "tanh"
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.kind == "mlp" and self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1 for an mlp")
        if self.activation != "tanh":
            raise ValueError("only the tanh activation is supported")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    def blocks(self) -> list[tuple[str, tuple[int, ...]]]:
        d, c, h = self.input_dim, self.num_classes, self.hidden_dim
        if self.kind == "logistic":
            return [("W", (d, c)), ("b", (c,))]
        return [("W1", (d, h)), ("b1", (h,)), ("W2", (h, c)), ("b2", (c,))]

    def output_blocks(self) -> tuple[str, ...]:
        return ("W", "b") if self.kind == "logistic" else ("W2", "b2")

    def layout(self) -> list[tuple[str, int, tuple[int, ...]]]:
        out, off = [], 0
        for name, shape in self.blocks():
            out.append((name, off, shape))
            off += int(np.prod(shape))
        return out

    @property
    def num_params(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.blocks())

    def with_dropout(self, rate: float) -> "ModelSpec":
        return ModelSpec(self.kind, self.input_dim, self.num_classes,
                         self.hidden_dim, self.activation, rate)


@dataclass(frozen=True)
class ParameterVector:
    values: np.ndarray
    layout: tuple

    @classmethod
    def from_spec(cls, spec: ModelSpec, values) -> "ParameterVector":
        values = np.array(values, dtype=np.float64).ravel()
        if values.size != spec.num_params:
            raise ValueError(f"expected {spec.num_params} values, got {values.size}")
        return cls(values, tuple(spec.layout()))

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def block(self, name: str) -> np.ndarray:
        """A reshaped *view* into ``values``."""
        for bname, off, shape in self.layout:
            if bname == name:
                return self.values[off: off + int(np.prod(shape))].reshape(shape)
        raise KeyError(name)

    def block_slice(self, name: str) -> slice:
        for bname, off, shape in self.layout:
            if bname == name:
                return slice(off, off + int(np.prod(shape)))
        raise KeyError(name)

    def copy(self) -> "ParameterVector":
        return ParameterVector(self.values.copy(), self.layout)

    def replace(self, values) -> "ParameterVector":
        return ParameterVector(np.array(values, dtype=np.float64), self.layout)


@dataclass(frozen=True)
class PredictionSet:
    probabilities: np.ndarray
    true_labels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        y = np.asarray(self.true_labels, dtype=np.int64)
        if p.ndim != 2 or p.shape[0] != y.shape[0]:
            raise ValueError("probabilities must be |S| x C with one label per row")
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "true_labels", y)

    def __len__(self):
        return int(self.true_labels.shape[0])

    @property
    def predicted_labels(self) -> np.ndarray:
        # np.argmax returns the first maximum: ties go to the lowest class
        return np.argmax(self.probabilities, axis=1)

    @property
    def confidences(self) -> np.ndarray:
        return np.max(self.probabilities, axis=1)

    @property
    def correct(self) -> np.ndarray:
        return self.predicted_labels == self.true_labels


def init_params(spec: ModelSpec, rng: Rng) -> ParameterVector:
    """Fan-scaled uniform weights, zero biases."""
    values = np.zeros(spec.num_params)
    for name, off, shape in spec.layout():
        if len(shape) == 2:
            a = np.sqrt(6.0 / (shape[0] + shape[1]))
            n = shape[0] * shape[1]
            values[off: off + n] = rng.split(name).uniform(-a, a, size=n)
    return ParameterVector(values, tuple(spec.layout()))


def _check(spec: ModelSpec, params: ParameterVector, features: np.ndarray):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"features must have {spec.input_dim} columns, got shape {x.shape}")
    if params.dim != spec.num_params:
        raise ValueError(f"parameter vector has {params.dim} entries, spec needs {spec.num_params}")
    return x


def _mask(spec: ModelSpec, shape, mode: str, rng: Optional[Rng]):
    if mode == "eval" or spec.dropout_rate == 0.0:
        return None
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    keep = 1.0 - spec.dropout_rate
    return (rng.uniform(size=shape) < keep) / keep


def _forward(spec, params, x, mode, rng):
    """Logits plus the cached intermediates the backward pass needs."""
    if spec.kind == "logistic":
        m = _mask(spec, x.shape, mode, rng)
        xin = x if m is None else x * m
        return xin @ params.block("W") + params.block("b"), (xin,)
    h = np.tanh(x @ params.block("W1") + params.block("b1"))
    m = _mask(spec, h.shape, mode, rng)
    hd = h if m is None else h * m
    return hd @ params.block("W2") + params.block("b2"), (x, h, m, hd)


def forward(spec, params, features, mode="eval", rng=None) -> np.ndarray:
    x = _check(spec, params, features)
    return _forward(spec, params, x, mode, rng)[0]


def predict(spec, params, dataset) -> PredictionSet:
    """Eval-mode class probabilities for every row of ``dataset``."""
    logits = forward(spec, params, dataset.features, "eval")
    return PredictionSet(softmax(logits), dataset.labels)


def _deltas(logits, labels):
    p = softmax(logits)
    p[np.arange(labels.size), labels] -= 1.0
    return p


def _per_sample_blocks(spec, params, cache, delta):
    """Per-sample gradient blocks, each with a leading |batch| axis."""
    if spec.kind == "logistic":
        (xin,) = cache
        return [np.einsum("ni,nc->nic", xin, delta), delta]
    x, h, m, hd = cache
    back = delta @ params.block("W2").T
    if m is not None:
        back = back * m
    dpre = back * (1.0 - h * h)
    return [
        np.einsum("ni,nj->nij", x, dpre),
        dpre,
        np.einsum("nj,nc->njc", hd, delta),
        delta,
    ]


def _batch_blocks(spec, params, cache, delta):
    """Summed (not averaged) gradient blocks over the batch."""
    if spec.kind == "logistic":
        (xin,) = cache
        return [xin.T @ delta, delta.sum(axis=0)]
    x, h, m, hd = cache
    back = delta @ params.block("W2").T
    if m is not None:
        back = back * m
    dpre = back * (1.0 - h * h)
    return [x.T @ dpre, dpre.sum(axis=0), hd.T @ delta, delta.sum(axis=0)]


def _labels(labels, n, num_classes):
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    if n == 0:
        raise ValueError("empty batch")
    if y.min() < 0 or y.max() >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return y


def loss_and_grad(spec, params, features, labels, mode="eval", rng=None):
    """Mean cross-entropy over the batch and its exact gradient."""
    x = _check(spec, params, features)
    y = _labels(labels, x.shape[0], spec.num_classes)
    logits, cache = _forward(spec, params, x, mode, rng)
    loss = -float(np.mean(log_softmax(logits)[np.arange(y.size), y]))
    blocks = _batch_blocks(spec, params, cache, _deltas(logits, y))
    grad = np.concatenate([b.ravel() for b in blocks]) / y.size
    return loss, grad


def loss(spec, params, features, labels, mode="eval", rng=None) -> float:
    x = _check(spec, params, features)
    y = _labels(labels, x.shape[0], spec.num_classes)
    logits = _forward(spec, params, x, mode, rng)[0]
    return -float(np.mean(log_softmax(logits)[np.arange(y.size), y]))


def per_sample_grads(spec, params, features, labels) -> np.ndarray:
    """Eval-mode gradients of every sample's loss, shape ``|S| x D``."""
    x = _check(spec, params, features)
    y = _labels(labels, x.shape[0], spec.num_classes)
    logits, cache = _forward(spec, params, x, "eval", None)
    blocks = _per_sample_blocks(spec, params, cache, _deltas(logits, y))
    return np.concatenate([b.reshape(y.size, -1) for b in blocks], axis=1)


def iter_per_sample_grads(spec, params, features, labels, chunk: int = 256) -> Iterator[np.ndarray]:
    """Same rows as :func:`per_sample_grads`, yielded ``chunk`` at a time."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise ValueError("empty sample set")
    for i in range(0, y.size, chunk):
        yield per_sample_grads(spec, params, x[i: i + chunk], y[i: i + chunk])
