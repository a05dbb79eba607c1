"""Segmentation and regression metrics with mergeable accumulators.

All four metrics pool pixels dataset-wide (micro-averaging): partial
accumulators combine associatively, so chips can be evaluated in any
grouping and reduced afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SingleClassError, ZeroVarianceError
from .otsu import WaterMask


def _mask_values(mask) -> np.ndarray:
    values = mask.values if isinstance(mask, WaterMask) else np.asarray(mask)
    return values.astype(np.int64, copy=False)


@dataclass
class ConfusionCounts:
    """Pixel-level confusion counts, accumulated across chips."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def update(self, pred_mask, truth_mask) -> "ConfusionCounts":
        pred = _mask_values(pred_mask)
        truth = _mask_values(truth_mask)
        if pred.shape != truth.shape:
            raise DimensionError(
                f"mask shapes differ: {pred.shape} vs {truth.shape}"
            )
        self.tp += int(np.sum((pred == 1) & (truth == 1)))
        self.fp += int(np.sum((pred == 1) & (truth == 0)))
        self.tn += int(np.sum((pred == 0) & (truth == 0)))
        self.fn += int(np.sum((pred == 0) & (truth == 1)))
        return self

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.tn + other.tn,
            self.fn + other.fn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def accuracy(counts: ConfusionCounts) -> float:
    """(tp + tn) / total over the pooled counts."""
    if counts.total == 0:
        raise ZeroDivisionError("no pixels accumulated")
    return (counts.tp + counts.tn) / counts.total


def mean_iou(counts: ConfusionCounts) -> float:
    """Mean of water-class and non-water-class intersection-over-union.

    A class absent from both prediction and truth has an empty union and
    contributes IoU 1 by convention.
    """
    water_union = counts.tp + counts.fp + counts.fn
    water = counts.tp / water_union if water_union > 0 else 1.0
    land_union = counts.tn + counts.fn + counts.fp
    land = counts.tn / land_union if land_union > 0 else 1.0
    return 0.5 * (water + land)


def _average_ranks(sorted_scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their group's average rank."""
    n = len(sorted_scores)
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[i : j + 1] = 0.5 * (i + j) + 1.0  # mean of ranks i+1 .. j+1
        i = j + 1
    return ranks


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve of continuous scores against binary labels.

    Equals the rank statistic P(score+ > score-) + 0.5 * P(score+ = score-),
    computed via the Mann-Whitney U from tie-averaged ranks.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.shape != labels.shape:
        raise DimensionError(
            f"scores and labels differ in length: {len(scores)} vs {len(labels)}"
        )
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("need at least one positive and one negative label")
    order = np.argsort(scores, kind="mergesort")
    ranks_sorted = _average_ranks(scores[order])
    pos_rank_sum = float(np.sum(ranks_sorted[labels[order] == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class R2Accumulator:
    """Pooled coefficient of determination: 1 - SS_res / SS_tot."""

    n: int = 0
    sum_t: float = 0.0
    sum_t2: float = 0.0
    sum_sq_res: float = 0.0

    def update(self, pred: np.ndarray, truth: np.ndarray) -> "R2Accumulator":
        pred = np.asarray(pred, dtype=np.float64).ravel()
        truth = np.asarray(truth, dtype=np.float64).ravel()
        if pred.shape != truth.shape:
            raise DimensionError(
                f"prediction and truth differ in length: {len(pred)} vs {len(truth)}"
            )
        self.n += len(truth)
        self.sum_t += float(truth.sum())
        self.sum_t2 += float(np.square(truth).sum())
        self.sum_sq_res += float(np.square(truth - pred).sum())
        return self

    def __add__(self, other: "R2Accumulator") -> "R2Accumulator":
        return R2Accumulator(
            self.n + other.n,
            self.sum_t + other.sum_t,
            self.sum_t2 + other.sum_t2,
            self.sum_sq_res + other.sum_sq_res,
        )

    def result(self) -> float:
        if self.n == 0:
            raise ZeroVarianceError("no pixels accumulated")
        ss_tot = self.sum_t2 - self.sum_t * self.sum_t / self.n
        if ss_tot <= 0.0:  # all truth values equal (up to rounding)
            raise ZeroVarianceError("truth values have zero variance")
        return 1.0 - self.sum_sq_res / ss_tot


def r2(pred: np.ndarray, truth: np.ndarray) -> float:
    """One-shot pooled R^2 over a single prediction/truth pair."""
    return R2Accumulator().update(pred, truth).result()


@dataclass
class MetricsReport:
    """Dataset-level evaluation summary."""

    accuracy: float
    auc: float
    r2: float
    mean_iou: float
    pixel_count: int
    chip_count: int
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "format_version": 1,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "r2": self.r2,
            "mean_iou": self.mean_iou,
            "pixel_count": self.pixel_count,
            "chip_count": self.chip_count,
        }
        out.update(self.extras)
        return out
