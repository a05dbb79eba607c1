"""Dataset-level evaluation of predicted water-index maps.

Protocol, per retained chip of the split under evaluation:

1. The reference mask comes from thresholding the chip's true index map
   with its own between-class-variance threshold; the predicted mask is
   produced the same way from the predicted map. A constant map has no
   usable histogram, so it falls back to the midpoint threshold 0.5.
2. Confusion counts and squared residuals pool across all chips of the
   split (micro-averaging), then accuracy, mean IoU and R^2 are read off
   the pooled accumulators.
3. AUC scores every pixel by its raw predicted value against the
   reference mask label, again pooled across chips. Chips whose true map
   is constant carry an arbitrary reference labeling, so they are left
   out of the AUC pool only.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import DatasetManifest, iterate_batches
from .errors import DegenerateHistogramError, SingleClassError
from .indices import UNIT, NdwiMap
from .metrics import (
    ConfusionCounts,
    MetricsReport,
    R2Accumulator,
    accuracy,
    auc,
    mean_iou,
)
from .otsu import WaterMask, binarize, build_histogram, otsu_threshold
from .unet import UNetParams, forward

FALLBACK_THRESHOLD = 0.5


def mask_via_otsu(m: NdwiMap, bins: int = 256) -> tuple[WaterMask, float, bool]:
    """Threshold one unit-scale map; returns (mask, threshold, degenerate).

    `degenerate` flags maps whose histogram collapses into a single bin,
    for which the midpoint fallback threshold is used instead.
    """
    try:
        result = otsu_threshold(build_histogram(m, bins))
        return binarize(m, result.threshold_value), result.threshold_value, False
    except DegenerateHistogramError:
        return binarize(m, FALLBACK_THRESHOLD), FALLBACK_THRESHOLD, True


def evaluate_chip_pairs(pairs, bins: int = 256) -> MetricsReport:
    """Pool metrics over an iterable of (predicted NdwiMap, truth NdwiMap)."""
    counts = ConfusionCounts()
    r2_acc = R2Accumulator()
    scores: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    n_chips = 0
    n_degenerate = 0

    for pred_map, truth_map in pairs:
        n_chips += 1
        truth_mask, _, truth_degenerate = mask_via_otsu(truth_map, bins)
        pred_mask, _, _ = mask_via_otsu(pred_map, bins)
        counts.update(pred_mask, truth_mask)
        r2_acc.update(pred_map.values, truth_map.values)
        if truth_degenerate:
            n_degenerate += 1
        else:
            scores.append(np.asarray(pred_map.values, dtype=np.float64).ravel())
            labels.append(truth_mask.values.ravel())

    if n_chips == 0:
        raise SingleClassError("no chips to evaluate")
    auc_value = auc(np.concatenate(scores), np.concatenate(labels))
    return MetricsReport(
        accuracy=accuracy(counts),
        auc=auc_value,
        r2=r2_acc.result(),
        mean_iou=mean_iou(counts),
        pixel_count=counts.total,
        chip_count=n_chips,
        extras={
            "degenerate_truth_chips": n_degenerate,
            "histogram_bins": bins,
            "confusion": {
                "tp": counts.tp,
                "fp": counts.fp,
                "tn": counts.tn,
                "fn": counts.fn,
            },
        },
    )


def evaluate_split(params: UNetParams, manifest: DatasetManifest, split: str,
                   chip_dir: str | Path, *, batch_size: int = 32,
                   bins: int = 256) -> MetricsReport:
    """Run the model over every chip of a split and pool the metrics."""

    def pairs():
        for batch in iterate_batches(manifest, split, batch_size, None, chip_dir):
            pred = forward(params, batch.inputs.astype(params.dtype))
            for i in range(pred.shape[0]):
                yield (
                    NdwiMap(pred[i, :, :, 0], UNIT),
                    NdwiMap(batch.targets[i, :, :, 0], UNIT),
                )

    report = evaluate_chip_pairs(pairs(), bins)
    report.extras["split"] = split
    return report


_TABLE_COLUMNS = ("Accuracy", "AUC", "R2 Score", "Mean IoU")


def render_table(reports: dict[str, MetricsReport]) -> str:
    """Fixed-width text table: one row per split, one column per metric."""
    rows = [("Metric",) + _TABLE_COLUMNS]
    for name, report in reports.items():
        rows.append(
            (name,)
            + tuple(f"{v:.4f}" for v in (report.accuracy, report.auc,
                                         report.r2, report.mean_iou))
        )
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
