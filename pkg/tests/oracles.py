"""Independent reference implementations used by the unit and acceptance suites.

Nothing here calls the package's loss, gradient or binning code.
"""

import math

import numpy as np

from lowres.model import ModelSpec, PredictionSet, init_params
from lowres.numerics import Rng, softmax


def oracle_loss(spec, values, x, y):
    blocks = {}
    off = 0
    for name, shape in spec.blocks():
        n = int(np.prod(shape))
        blocks[name] = values[off: off + n].reshape(shape)
        off += n
    if spec.kind == "logistic":
        z = x @ blocks["W"] + blocks["b"]
    else:
        z = np.tanh(x @ blocks["W1"] + blocks["b1"]) @ blocks["W2"] + blocks["b2"]
    total = 0.0
    for row, label in zip(z, y):
        m = max(row)
        total += math.log(sum(math.exp(v - m) for v in row)) + m - row[label]
    return total / len(y)


def central_difference(spec, values, x, y):
    g = np.zeros_like(values)
    for k in range(values.size):
        h = 1e-6 * max(1.0, abs(values[k]))
        up, down = values.copy(), values.copy()
        up[k] += h
        down[k] -= h
        g[k] = (oracle_loss(spec, up, x, y) - oracle_loss(spec, down, x, y)) / (2 * h)
    return g


def relative_error(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def random_case(i):
    rng = Rng(1000 + i)
    draw = rng.split("shape")
    kind = "logistic" if i % 2 == 0 else "mlp"
    spec = ModelSpec(kind, int(draw.integers(1, 6)), int(draw.integers(2, 5)),
                     int(draw.integers(1, 6)) if kind == "mlp" else 0)
    params = init_params(spec, rng.split("init"))
    params = params.replace(params.values + 0.3 * rng.split("jitter").normal(size=params.dim))
    n = int(draw.integers(1, 9))
    x = rng.split("x").normal(size=(n, spec.input_dim))
    y = rng.split("y").integers(0, spec.num_classes, size=n)
    return spec, params, x, y


def naive_calibration(probs, labels, num_bins):
    """Loop over bins with explicit interval membership; returns (ece, oe)."""
    n = len(labels)
    conf = [max(row) for row in probs]
    pred = [int(np.argmax(row)) for row in probs]
    ece_total = oe_total = 0.0
    for m in range(1, num_bins + 1):
        lo, hi = (m - 1) / num_bins, m / num_bins
        members = [i for i in range(n) if (lo < conf[i] <= hi) or (m == 1 and conf[i] <= lo)]
        if not members:
            continue
        acc = sum(pred[i] == labels[i] for i in members) / len(members)
        c = sum(conf[i] for i in members) / len(members)
        w = len(members) / n
        ece_total += w * abs(acc - c)
        oe_total += w * c * max(c - acc, 0.0)
    return ece_total, oe_total


def random_predictions(seed):
    rng = Rng(seed)
    C = int(rng.integers(2, 7))
    n = int(rng.integers(1, 501))
    temp = float(rng.uniform(0.1, 5.0))
    probs = softmax(temp * rng.normal(size=(n, C)))
    labels = rng.integers(0, C, size=n)
    return PredictionSet(probs, labels)
