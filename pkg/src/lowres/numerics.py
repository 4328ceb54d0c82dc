"""Dense numeric helpers and a splittable, counter-based random generator.

All arrays are float64 numpy arrays in row-major order.
"""

from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

Label = Union[str, int]


def _as_logits(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or x.shape[-1] == 0:
        raise ValueError("empty logit vector")
    return x


def log_sum_exp(logits) -> np.ndarray | float:
    """Stable ``log(sum(exp(x)))`` along the last axis."""
    x = _as_logits(logits)
    top = np.max(x, axis=-1, keepdims=True)
    out = np.log(np.sum(np.exp(x - top), axis=-1)) + top[..., 0]
    return float(out) if out.ndim == 0 else out


def log_softmax(logits) -> np.ndarray:
    x = _as_logits(logits)
    shifted = x - np.max(x, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax(logits) -> np.ndarray:
    """Row-wise softmax computed with max-subtraction.

    Accepts a vector or a matrix (one distribution per row).
    """
    x = _as_logits(logits)
    e = np.exp(x - np.max(x, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def _label_key(label: Label) -> int:
    # Stable across processes, unlike hash(); type-tagged so 1 != "1".
    tag = f"{type(label).__name__}:{label}".encode()
    return int.from_bytes(hashlib.blake2b(tag, digest_size=8).digest(), "little")


class Rng:
    """Deterministic generator addressed by ``(seed, path)``.

    Child streams come from :meth:`split` and depend only on the parent's
    seed and path plus the label, never on how many draws the parent has
    made. That keeps parallel runs order-independent.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if seed < 0:
            raise ValueError("seed must be nonnegative")
        self.seed = int(seed)
        self.path = tuple(path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def split(self, *labels: Label) -> "Rng":
        if not labels:
            raise ValueError("split needs at least one label")
        return Rng(self.seed, self.path + tuple(_label_key(l) for l in labels))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, depth={len(self.path)})"

    # thin wrappers so callers rarely touch the numpy Generator directly
    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def seed_list(self, n: int) -> list[int]:
        """``n`` distinct 32-bit seeds drawn from this stream."""
        return [int(s) for s in self.generator.choice(2**32, size=n, replace=False)]


def split_rng(rng: Rng, label: Label) -> Rng:
    return rng.split(label)
