"""Adam/SGD and the epoch loop that consults a pluggable stop criterion."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol

import numpy as np

from . import metrics
from .data import Dataset
from .model import ModelSpec, ParameterVector, loss_and_grad, predict
from .numerics import Rng

log = logging.getLogger(__name__)

STOP_REASONS = ("val_min", "eb_triggered", "pe_schedule", "max_epochs_cap")


@dataclass(frozen=True)
class OptimConfig:
    algorithm: str = "adam"
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 200
    shuffle: bool = True

    def __post_init__(self):
        if self.algorithm not in ("adam", "sgd"):
            raise ValueError(f"algorithm must be 'adam' or 'sgd', got {self.algorithm!r}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")

    def with_(self, **kw) -> "OptimConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, dim: int) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim), 0)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray, config: OptimConfig):
    if params.shape != grad.shape or state.m.shape != grad.shape:
        raise ValueError("parameter, gradient and moment shapes differ")
    t = state.t + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * grad
    v = config.beta2 * state.v + (1.0 - config.beta2) * grad * grad
    m_hat = m / (1.0 - config.beta1**t)
    v_hat = v / (1.0 - config.beta2**t)
    new = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    return AdamState(m, v, t), new


def sgd_step(params: np.ndarray, grad: np.ndarray, config: OptimConfig) -> np.ndarray:
    return params - config.learning_rate * grad


# --------------------------------------------------------------------------
# stop-criterion protocol


@dataclass(frozen=True)
class Verdict:
    stop: bool = False
    statistic: Optional[float] = None


class StopCriterion(Protocol):
    """What :func:`train` needs from a criterion.

    ``validation`` is evaluated after every epoch when not None.
    ``restore_best`` makes train() return the minimum-validation-loss
    snapshot. ``fire_reason`` labels an early stop, ``cap_reason`` labels a
    run that reached ``max_epochs``.
    """

    name: str
    validation: Optional[Dataset]
    restore_best: bool
    fire_reason: str
    cap_reason: str

    def start(self, max_epochs: int) -> list[str]: ...

    def after_epoch(self, epoch: int, spec: ModelSpec, params: ParameterVector,
                    train_set: Dataset, val_loss: Optional[float]) -> Verdict: ...


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: Optional[float] = None
    eb_statistic: Optional[float] = None
    snapshot: Optional[int] = None


@dataclass
class TrainingTrace:
    records: list[EpochRecord] = field(default_factory=list)
    stop_epoch: int = 0
    stop_reason: str = ""
    criterion: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def epochs_trained(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def min_val_loss(self) -> float:
        vals = [r.val_loss for r in self.records if r.val_loss is not None]
        if not vals:
            raise ValueError("trace holds no validation losses")
        return float(min(vals))


def validation_loss(spec: ModelSpec, params: ParameterVector, val: Dataset) -> float:
    return metrics.cross_entropy(predict(spec, params, val))


def train(
    spec: ModelSpec,
    init: ParameterVector,
    train_set: Dataset,
    config: OptimConfig,
    criterion: StopCriterion,
    rng: Rng,
    on_epoch: Optional[Callable[[int, ParameterVector], None]] = None,
):
    """Mini-batch training with epoch-boundary stop checks.

    Returns ``(params, trace)``. With a ``restore_best`` criterion the
    parameters are the minimum-validation-loss snapshot (earliest epoch on
    ties); otherwise they are the parameters at the stop epoch.
    """
    n = len(train_set)
    if n == 0:
        raise ValueError("empty training set")
    trace = TrainingTrace(criterion=criterion.name)
    trace.notes.extend(criterion.start(config.max_epochs))

    x, y = train_set.features, train_set.labels
    theta = init.values.copy()
    state = AdamState.zeros(theta.size)
    best_loss, best_epoch, best = np.inf, 0, None
    stopped = False

    for epoch in range(1, config.max_epochs + 1):
        erng = rng.split("epoch", epoch)
        order = erng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo: lo + config.batch_size]
            batch_loss, grad = loss_and_grad(
                spec, init.replace(theta), x[idx], y[idx], "train", erng
            )
            total += batch_loss * idx.size
            if config.algorithm == "adam":
                state, theta = adam_step(state, theta, grad, config)
            else:
                theta = sgd_step(theta, grad, config)

        params = init.replace(theta)
        val_loss = None
        if criterion.validation is not None:
            val_loss = validation_loss(spec, params, criterion.validation)
        verdict = criterion.after_epoch(epoch, spec, params, train_set, val_loss)

        snap = None
        if criterion.restore_best and val_loss is not None and val_loss < best_loss:
            best_loss, best_epoch, best = val_loss, epoch, theta.copy()
            snap = epoch
        trace.records.append(EpochRecord(epoch, total / n, val_loss, verdict.statistic, snap))
        if on_epoch is not None:
            on_epoch(epoch, params)
        if verdict.stop:
            stopped = True
            break

    last = trace.records[-1].epoch
    if criterion.restore_best:
        trace.stop_epoch, trace.stop_reason = best_epoch, criterion.fire_reason
        return init.replace(best), trace
    trace.stop_epoch = last
    trace.stop_reason = criterion.fire_reason if stopped else criterion.cap_reason
    return init.replace(theta), trace
