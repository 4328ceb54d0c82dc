"""Stop criteria: evidence-based (EB), pre-estimated stop epoch (PE), Val-based.

The EB statistic is computed over the full training set at each epoch
boundary from per-sample gradients::

    stat = 1 - (|S| / D_eff) * sum_k mean_k**2 / var_k

where ``var`` is the unbiased per-coordinate variance of the per-sample
gradients. Coordinates whose variance falls below ``eps_var`` are dropped
from both the sum and ``D_eff``; with none left the statistic is +1.
Training stops once ``stat > 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from . import optim
from .data import DataError, Dataset, stratified_kfold
from .model import ModelSpec, ParameterVector, init_params, iter_per_sample_grads
from .numerics import Rng
from .optim import OptimConfig, Verdict

log = logging.getLogger(__name__)

DEFAULT_EPS_VAR = 1e-12


@dataclass(frozen=True)
class GradientStats:
    sample_count: int
    mean_grad: np.ndarray
    variance: np.ndarray
    eps_var: float = DEFAULT_EPS_VAR

    @property
    def effective(self) -> np.ndarray:
        return self.variance >= self.eps_var

    @property
    def effective_dims(self) -> int:
        return int(np.count_nonzero(self.effective))


def gradient_stats(
    grads: Union[np.ndarray, Iterable[np.ndarray]],
    dim: Optional[int] = None,
    eps_var: float = DEFAULT_EPS_VAR,
) -> GradientStats:
    """Mean and unbiased variance from streaming sums of g and g**2.

    ``grads`` is an ``|S| x D`` array or any iterable of gradient vectors or
    row-chunks. The variance is ``(sum g^2 - |S| mean^2) / (|S| - 1)``
    clamped at zero.
    """
    if eps_var <= 0:
        raise ValueError("eps_var must be > 0")
    chunks = [grads] if isinstance(grads, np.ndarray) else grads
    s1 = s2 = None
    count = 0
    for g in chunks:
        g = np.atleast_2d(np.asarray(g, dtype=np.float64))
        if s1 is None:
            if dim is not None and g.shape[1] != dim:
                raise ValueError(f"gradient dimension {g.shape[1]} != {dim}")
            s1 = np.zeros(g.shape[1])
            s2 = np.zeros(g.shape[1])
        s1 += g.sum(axis=0)
        s2 += np.einsum("ij,ij->j", g, g)
        count += g.shape[0]
    if count < 2:
        raise ValueError("variance estimator undefined for fewer than 2 samples")
    mean = s1 / count
    var = np.maximum((s2 - count * mean * mean) / (count - 1), 0.0)
    return GradientStats(count, mean, var, eps_var)


def eb_statistic(stats: GradientStats) -> float:
    keep = stats.effective
    d_eff = int(np.count_nonzero(keep))
    if d_eff == 0:
        return 1.0
    snr = stats.mean_grad[keep] ** 2 / stats.variance[keep]
    return float(1.0 - stats.sample_count / d_eff * np.sum(snr))


def eb_should_stop(spec: ModelSpec, params: ParameterVector, train_set: Dataset,
                   eps_var: float = DEFAULT_EPS_VAR) -> tuple[bool, float]:
    """Full-set, eval-mode EB check. Returns ``(stop, statistic)``."""
    grads = iter_per_sample_grads(spec, params, train_set.features, train_set.labels)
    stat = eb_statistic(gradient_stats(grads, spec.num_params, eps_var))
    return stat > 0.0, stat


# --------------------------------------------------------------------------
# criteria


@dataclass
class EbCriterion:
    eps_var: float = DEFAULT_EPS_VAR
    name: str = "eb"
    validation: Optional[Dataset] = None
    restore_best: bool = False
    fire_reason: str = "eb_triggered"
    cap_reason: str = "max_epochs_cap"
    fired_at: Optional[int] = None

    def start(self, max_epochs):
        if self.eps_var <= 0:
            raise ValueError("eps_var must be > 0")
        self.fired_at = None
        return []

    def after_epoch(self, epoch, spec, params, train_set, val_loss):
        stop, stat = eb_should_stop(spec, params, train_set, self.eps_var)
        if stop and self.fired_at is None:
            self.fired_at = epoch
        return Verdict(self.fired_at is not None, stat)


@dataclass
class ValBasedCriterion:
    """Train to ``max_epochs`` (or until ``patience`` epochs pass without
    improvement) and keep the minimum-validation-loss snapshot."""

    validation: Dataset
    patience: Optional[int] = None
    name: str = "val"
    restore_best: bool = True
    fire_reason: str = "val_min"
    cap_reason: str = "val_min"
    _best: float = field(default=math.inf, repr=False)
    _best_epoch: int = field(default=0, repr=False)

    def start(self, max_epochs):
        self._best, self._best_epoch = math.inf, 0
        return []

    def after_epoch(self, epoch, spec, params, train_set, val_loss):
        if val_loss < self._best:
            self._best, self._best_epoch = val_loss, epoch
        stop = self.patience is not None and epoch - self._best_epoch >= self.patience
        return Verdict(stop)


def val_based_criterion(validation: Dataset, patience: Optional[int] = None) -> ValBasedCriterion:
    if validation is None or len(validation) == 0:
        raise ValueError("Val-based stopping needs a nonempty validation set")
    if patience is not None and patience < 1:
        raise ValueError("patience must be >= 1")
    return ValBasedCriterion(validation, patience)


@dataclass
class FixedEpochCriterion:
    stop_epoch: int
    name: str = "fixed"
    validation: Optional[Dataset] = None
    restore_best: bool = False
    fire_reason: str = "pe_schedule"
    cap_reason: str = "max_epochs_cap"
    _target: int = field(default=0, repr=False)

    def start(self, max_epochs):
        notes = []
        self._target = self.stop_epoch
        if self.stop_epoch > max_epochs:
            notes.append(f"stop epoch {self.stop_epoch} clamped to max_epochs={max_epochs}")
            self._target = max_epochs
        return notes

    def after_epoch(self, epoch, spec, params, train_set, val_loss):
        return Verdict(epoch >= self._target)


def fixed_epoch_criterion(stop_epoch: int, name: str = "fixed") -> FixedEpochCriterion:
    if stop_epoch < 1:
        raise ValueError("stop_epoch must be >= 1")
    return FixedEpochCriterion(int(stop_epoch), name=name)


def eb_criterion(eps_var: float = DEFAULT_EPS_VAR) -> EbCriterion:
    if eps_var <= 0:
        raise ValueError("eps_var must be > 0")
    return EbCriterion(eps_var)


# --------------------------------------------------------------------------
# PE-stop-epoch


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PeResult:
    fold_stop_epochs: tuple[int, ...]
    pe_stop_epoch: int
    warnings: tuple[str, ...] = ()


def pe_from_fold_epochs(fold_epochs, max_epochs: int, warnings=()) -> PeResult:
    epochs = tuple(int(e) for e in fold_epochs)
    if not epochs:
        raise ValueError("no fold stop epochs")
    # floor(mean + 1/2) in exact integer arithmetic
    pe = (2 * sum(epochs) + len(epochs)) // (2 * len(epochs))
    pe = min(max(pe, 1), max_epochs)
    return PeResult(epochs, pe, tuple(warnings))


def estimate_pe_stop_epoch(
    spec: ModelSpec,
    samples: Dataset,
    k: int,
    config: OptimConfig,
    rng: Rng,
    init: Optional[ParameterVector] = None,
) -> PeResult:
    """Rounded mean of the min-validation-loss epochs over ``k`` stratified folds.

    Every fold run starts from ``init`` (default: ``init_params`` with
    ``rng.split("init")``); fold ``j`` trains on the other ``k - 1`` folds
    with ``rng.split("fold", j)``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(samples):
        raise DataError(f"k={k} exceeds the sample count {len(samples)}")
    if init is None:
        init = init_params(spec, rng.split("init"))
    folds = stratified_kfold(samples, k, rng.split("folds"))
    epochs = []
    for j in range(k):
        tr, va = folds.train_val(j)
        crit = val_based_criterion(samples.subset(va))
        _, trace = optim.train(spec, init, samples.subset(tr), config, crit, rng.split("fold", j))
        epochs.append(trace.stop_epoch)
    return pe_from_fold_epochs(epochs, config.max_epochs, folds.warnings)
