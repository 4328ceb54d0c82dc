"""Good-initialization search by two-phase swap training over candidate seeds.

Each candidate initialization is trained on one stratified half of the
sample set and validated on the other, then again with the halves swapped.
Its instability in each phase is the minimum validation loss reached; the
candidate with the smallest summed instability wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import optim
from .data import DataError, Dataset, stratified_holdout
from .model import ModelSpec, ParameterVector, init_params
from .numerics import Rng
from .optim import OptimConfig
from .stopping import val_based_criterion


@dataclass(frozen=True)
class FogipConfig:
    seeds: tuple[int, ...]
    optim: OptimConfig = field(default_factory=OptimConfig)
    # "full" searches the whole vector, "output" only the output layer
    scope: str = "full"
    base_seed: int = 0

    def __post_init__(self):
        if len(self.seeds) < 1:
            raise ValueError("need at least one candidate seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("candidate seeds must be distinct")
        if self.scope not in ("full", "output"):
            raise ValueError("scope must be 'full' or 'output'")

    @property
    def n(self) -> int:
        return len(self.seeds)

    @classmethod
    def from_rng(cls, n: int, rng: Rng, **kw) -> "FogipConfig":
        return cls(tuple(rng.seed_list(n)), **kw)


@dataclass(frozen=True)
class InstabilityRecord:
    phase_a: np.ndarray
    phase_b: np.ndarray
    selected: int  # 0-based
    trainings: int

    @property
    def total(self) -> np.ndarray:
        return self.phase_a + self.phase_b


def split_half(samples: Dataset, rng: Rng):
    counts = samples.class_counts()
    for c, n in enumerate(counts):
        if 0 < n < 2:
            raise DataError(f"class {c} has a single sample; cannot split it in half")
    return stratified_holdout(samples, 0.5, rng)


def candidates(spec: ModelSpec, config: FogipConfig) -> list[ParameterVector]:
    out = [init_params(spec, Rng(s)) for s in config.seeds]
    if config.scope == "full":
        return out
    base = init_params(spec, Rng(config.base_seed)).values
    merged = []
    for p in out:
        v = base.copy()
        for name in spec.output_blocks():
            sl = p.block_slice(name)
            v[sl] = p.values[sl]
        merged.append(p.replace(v))
    return merged


def instabilities(
    spec: ModelSpec,
    train_set: Dataset,
    val_set: Dataset,
    params: Sequence[ParameterVector],
    config: OptimConfig,
    rng: Rng,
) -> np.ndarray:
    """Minimum validation loss over training, one entry per candidate.

    Every candidate sees the same shuffling/dropout stream, so results do not
    depend on a candidate's position in the list.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation sets must be nonempty")
    out = np.empty(len(params))
    for i, p in enumerate(params):
        _, trace = optim.train(spec, p, train_set, config, val_based_criterion(val_set), rng)
        out[i] = trace.min_val_loss()
    return out


def select(total: np.ndarray) -> int:
    # np.argmin keeps the first minimum: ties go to the lowest index
    return int(np.argmin(total))


def fogip(samples: Dataset, config: FogipConfig, spec: ModelSpec, rng: Rng,
          pool: Optional[Sequence[ParameterVector]] = None):
    """Return the selected *untrained* candidate and the instability record."""
    pool = list(pool) if pool is not None else candidates(spec, config)
    if len(pool) != config.n:
        raise ValueError(f"expected {config.n} candidates, got {len(pool)}")
    half_a, half_b = split_half(samples, rng.split("halves"))
    ia = instabilities(spec, half_a, half_b, pool, config.optim, rng.split("phase", "A"))
    ib = instabilities(spec, half_b, half_a, pool, config.optim, rng.split("phase", "B"))
    g = select(ia + ib)
    return pool[g].copy(), InstabilityRecord(ia, ib, g, 2 * len(pool))
