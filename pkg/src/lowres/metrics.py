"""Accuracy, cross-entropy and calibration metrics (ECE, OE)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PredictionSet

PROB_FLOOR = 1e-300
DEFAULT_BINS = 10


def _nonempty(pred: PredictionSet):
    if len(pred) == 0:
        raise ValueError("empty prediction set")


def accuracy(pred: PredictionSet) -> float:
    _nonempty(pred)
    return float(np.mean(pred.correct))


def cross_entropy(pred: PredictionSet) -> float:
    _nonempty(pred)
    p_true = pred.probabilities[np.arange(len(pred)), pred.true_labels]
    return float(-np.mean(np.log(np.maximum(p_true, PROB_FLOOR))))


@dataclass(frozen=True)
class CalibrationBins:
    """Occupancy and per-bin accuracy/confidence over ``((m-1)/M, m/M]``.

    ``index[i]`` is the 0-based bin of sample ``i``. Empty bins report zero
    accuracy and confidence and carry no weight.
    """

    num_bins: int
    index: np.ndarray
    counts: np.ndarray
    accuracy: np.ndarray
    confidence: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def weights(self) -> np.ndarray:
        return self.counts / max(self.total, 1)

    def edges(self) -> np.ndarray:
        return np.arange(self.num_bins + 1) / self.num_bins

    def members(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.index == m)


def bin_of(confidence: np.ndarray, num_bins: int) -> np.ndarray:
    """0-based bin index for ``((m-1)/M, m/M]`` intervals."""
    conf = np.asarray(confidence, dtype=np.float64)
    m = np.clip(np.ceil(conf * num_bins).astype(np.int64), 1, num_bins)
    # conf * M can round across an edge; fix up against the exact edge values
    m = np.where((m > 1) & (conf <= (m - 1) / num_bins), m - 1, m)
    m = np.where((m < num_bins) & (conf > m / num_bins), m + 1, m)
    return m - 1


def calibration_bins(pred: PredictionSet, num_bins: int = DEFAULT_BINS) -> CalibrationBins:
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    conf = pred.confidences
    idx = bin_of(conf, num_bins)
    counts = np.bincount(idx, minlength=num_bins)
    hits = np.bincount(idx, weights=pred.correct.astype(np.float64), minlength=num_bins)
    conf_sum = np.bincount(idx, weights=conf, minlength=num_bins)
    safe = np.maximum(counts, 1)
    return CalibrationBins(num_bins, idx, counts, hits / safe, conf_sum / safe)


def ece(bins: CalibrationBins) -> float:
    return float(np.sum(bins.weights * np.abs(bins.accuracy - bins.confidence)))


def oe(bins: CalibrationBins) -> float:
    gap = np.maximum(bins.confidence - bins.accuracy, 0.0)
    return float(np.sum(bins.weights * bins.confidence * gap))


@dataclass(frozen=True)
class ConfidenceHistogram:
    counts: np.ndarray
    edges: np.ndarray
    mean_confidence: float
    accuracy: float

    @property
    def gap(self) -> float:
        """Average confidence minus accuracy; positive means over-confident."""
        return self.mean_confidence - self.accuracy


def confidence_histogram(pred: PredictionSet, num_bins: int = DEFAULT_BINS) -> ConfidenceHistogram:
    bins = calibration_bins(pred, num_bins)
    return ConfidenceHistogram(
        bins.counts.copy(),
        bins.edges(),
        float(np.mean(pred.confidences)),
        accuracy(pred),
    )


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    loss: float
    ece: float
    oe: float
    bins: CalibrationBins
    histogram: ConfidenceHistogram

    def as_row(self) -> dict:
        return {"accuracy": self.accuracy, "loss": self.loss, "ece": self.ece, "oe": self.oe}


def evaluate(pred: PredictionSet, num_bins: int = DEFAULT_BINS) -> MetricReport:
    bins = calibration_bins(pred, num_bins)
    hist = ConfidenceHistogram(
        bins.counts.copy(), bins.edges(), float(np.mean(pred.confidences)), accuracy(pred)
    )
    return MetricReport(hist.accuracy, cross_entropy(pred), ece(bins), oe(bins), bins, hist)
