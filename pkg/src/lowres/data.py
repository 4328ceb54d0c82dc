"""Datasets, CSV ingestion, synthetic benchmarks and stratified splits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .numerics import Rng

log = logging.getLogger(__name__)


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = ""
    label_names: tuple = ()

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if features.shape[0] != labels.shape[0]:
            raise DataError(
                f"{features.shape[0]} feature rows but {labels.shape[0]} labels"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def absent_classes(self) -> list[int]:
        return [c for c, n in enumerate(self.class_counts()) if n == 0]

    def subset(self, indices, name: Optional[str] = None) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            self.num_classes,
            name if name is not None else self.name,
            self.label_names,
        )


@dataclass(frozen=True)
class SplitPlan:
    """Declarative description of how a sample set gets partitioned."""

    kind: str  # "holdout" | "kfold" | "low_resource"
    seed: int = 0
    train_frac: float = 0.5
    k: int = 4
    label_frac: float = 0.02

    def __post_init__(self):
        if self.kind not in ("holdout", "kfold", "low_resource"):
            raise ValueError(f"unknown split kind {self.kind!r}")
        if self.kind == "holdout" and not 0 < self.train_frac < 1:
            raise ValueError("train_frac must lie in (0, 1)")
        if self.kind == "low_resource" and not 0 < self.label_frac < 1:
            raise ValueError("label_frac must lie in (0, 1)")
        if self.kind == "kfold" and self.k < 2:
            raise ValueError("k must be >= 2")


# --------------------------------------------------------------------------
# ingestion


def load_csv(path) -> Dataset:
    """Read a header-row CSV with a ``label`` column and numeric features.

    Labels are mapped to integers in order of first appearance. Quoting and
    escaping are not supported.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if "label" not in header:
        raise DataError(f"{path}: missing 'label' column in header")
    label_col = header.index("label")
    rows = lines[1:]
    if not rows:
        raise DataError(f"{path}: empty dataset (header only)")

    mapping: dict[str, int] = {}
    labels = []
    feats = []
    for r, line in enumerate(rows, start=1):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise DataError(
                f"{path}: row {r} has {len(cells)} cells, header has {len(header)}"
            )
        vec = []
        for c, cell in enumerate(cells, start=1):
            if c - 1 == label_col:
                continue
            try:
                vec.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric feature {cell!r} at row {r}, column {c}"
                ) from None
        lab = cells[label_col]
        labels.append(mapping.setdefault(lab, len(mapping)))
        feats.append(vec)

    if len(mapping) < 2:
        log.warning("%s: only %d distinct label(s)", path, len(mapping))
    names = tuple(mapping)
    desc = ",".join(f"{k}={v}" for k, v in mapping.items())
    return Dataset(
        np.array(feats, dtype=np.float64).reshape(len(rows), len(header) - 1),
        np.array(labels),
        max(len(mapping), 1),
        name=f"{path.stem}[{desc}]",
        label_names=names,
    )


def save_csv(ds: Dataset, path) -> None:
    names = ds.label_names or tuple(str(c) for c in range(ds.num_classes))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join([f"x{j}" for j in range(ds.dim)] + ["label"]) + "\n")
        for x, y in zip(ds.features, ds.labels):
            fh.write(",".join([repr(float(v)) for v in x] + [names[y]]) + "\n")


# --------------------------------------------------------------------------
# synthetic data


def class_directions(num_classes: int, dim: int, rng: Rng) -> np.ndarray:
    """Unit directions, one row per class; orthonormal whenever C <= d."""
    raw = rng.normal(size=(dim, num_classes))
    if num_classes <= dim:
        q, _ = np.linalg.qr(raw)
        return q[:, :num_classes].T.copy()
    return (raw / np.linalg.norm(raw, axis=0)).T.copy()


def synth_gaussian(
    num_classes: int,
    dim: int,
    counts,
    separation: float,
    noise: float,
    rng: Rng,
    name: str = "gaussian",
) -> Dataset:
    """Isotropic Gaussian classes centred at ``separation * u_c``.

    Directions come from ``rng.split("directions")`` and samples from
    ``rng.split("samples")``, so datasets with the same seed share geometry.
    """
    counts = [int(c) for c in np.broadcast_to(counts, (num_classes,))]
    if num_classes < 2 or dim < 1 or min(counts) < 1 or noise <= 0:
        raise ValueError("need C >= 2, d >= 1, counts >= 1 and noise > 0")
    dirs = class_directions(num_classes, dim, rng.split("directions"))
    draw = rng.split("samples")
    labels = np.repeat(np.arange(num_classes), counts)
    x = separation * dirs[labels] + noise * draw.normal(size=(labels.size, dim))
    order = draw.permutation(labels.size)
    return Dataset(x[order], labels[order], num_classes, name=name)


# --------------------------------------------------------------------------
# splits


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def largest_remainder(counts, frac: float) -> np.ndarray:
    """Per-class quotas summing to round(frac * total), each floor or ceil."""
    counts = np.asarray(counts, dtype=np.int64)
    exact = counts * frac
    base = np.floor(exact).astype(np.int64)
    extra = _round_half_up(float(counts.sum()) * frac) - int(base.sum())
    rem = exact - base
    # stable sort: equal remainders go to the lowest class index first
    order = np.argsort(-rem, kind="stable")
    quotas = base.copy()
    for c in order[: max(extra, 0)]:
        quotas[c] += 1
    return np.minimum(quotas, counts)


def _class_members(labels: np.ndarray, num_classes: int, rng: Rng) -> list[np.ndarray]:
    out = []
    for c in range(num_classes):
        idx = np.flatnonzero(labels == c)
        out.append(idx[rng.split("class", c).permutation(idx.size)])
    return out


def stratified_holdout_indices(ds: Dataset, train_frac: float, rng: Rng):
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie in (0, 1)")
    members = _class_members(ds.labels, ds.num_classes, rng)
    quotas = largest_remainder([m.size for m in members], train_frac)
    first = np.concatenate([m[:q] for m, q in zip(members, quotas)])
    second = np.concatenate([m[q:] for m, q in zip(members, quotas)])
    if first.size == 0 or second.size == 0:
        raise DataError(
            f"holdout with train_frac={train_frac} on {len(ds)} samples leaves an empty part"
        )
    return np.sort(first), np.sort(second)


def stratified_holdout(ds: Dataset, train_frac: float, rng: Rng):
    a, b = stratified_holdout_indices(ds, train_frac, rng)
    return ds.subset(a), ds.subset(b)


@dataclass
class Folds:
    indices: list[np.ndarray]
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.indices)

    def train_val(self, j: int):
        train = np.sort(np.concatenate([f for i, f in enumerate(self.indices) if i != j]))
        return train, self.indices[j]


def stratified_kfold(ds: Dataset, k: int, rng: Rng) -> Folds:
    """Deal each class's shuffled members round-robin over ``k`` folds.

    The dealing offset carries over between classes, which keeps total fold
    sizes within one of each other as well.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(ds):
        raise DataError(f"k={k} exceeds the number of samples ({len(ds)})")
    warns = []
    buckets: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for c, members in enumerate(_class_members(ds.labels, ds.num_classes, rng)):
        if 0 < members.size < k:
            msg = f"class {c} has {members.size} sample(s) < k={k}; absent from some folds"
            warns.append(msg)
            log.warning(msg)
        for j, i in enumerate(members):
            buckets[(offset + j) % k].append(int(i))
        offset = (offset + members.size) % k
    return Folds([np.array(sorted(b), dtype=np.int64) for b in buckets], warns)


def low_resource_protocol(
    ds: Dataset,
    label_frac: float,
    repetitions: int,
    rng: Rng,
    test_set: Optional[Dataset] = None,
):
    """``repetitions`` stratified (labeled pool, test) pairs.

    ``ds`` is the base pool the labeled fraction is drawn from. Without
    ``test_set`` the remainder of ``ds`` is the test set; with it, a fixed
    standard test set is returned for every repetition.
    """
    if not 0 < label_frac < 1:
        raise ValueError("label_frac must lie in (0, 1)")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    out = []
    for r in range(repetitions):
        pool_idx, rest_idx = stratified_holdout_indices(ds, label_frac, rng.split("rep", r))
        if pool_idx.size < ds.num_classes:
            raise DataError(
                f"labeled pool of {pool_idx.size} is smaller than the class count {ds.num_classes}"
            )
        test = test_set if test_set is not None else ds.subset(rest_idx)
        out.append((ds.subset(pool_idx), test))
    return out
