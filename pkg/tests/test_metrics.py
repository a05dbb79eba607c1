import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import allpairs_auc, loop_accuracy, loop_mean_iou, loop_r2
from sar2ndwi.errors import DimensionError, SingleClassError, ZeroVarianceError
from sar2ndwi.metrics import (
    ConfusionCounts,
    MetricsReport,
    R2Accumulator,
    accuracy,
    auc,
    mean_iou,
    r2,
)
from sar2ndwi.otsu import WaterMask


def test_confusion_counts_known_case():
    pred = np.array([[1, 1], [0, 0]])
    truth = np.array([[1, 0], [0, 1]])
    counts = ConfusionCounts().update(pred, truth)
    assert (counts.tp, counts.fp, counts.tn, counts.fn) == (1, 1, 1, 1)
    assert accuracy(counts) == 0.5


def test_confusion_accepts_water_masks():
    mask = WaterMask(np.array([1, 0, 1]))
    counts = ConfusionCounts().update(mask, mask)
    assert (counts.tp, counts.tn) == (2, 1)
    assert accuracy(counts) == 1.0
    assert mean_iou(counts) == 1.0


def test_confusion_shape_mismatch():
    with pytest.raises(DimensionError):
        ConfusionCounts().update(np.zeros((2, 2)), np.zeros((2, 3)))


def test_confusion_counts_merge_associatively(rng):
    preds = rng.integers(0, 2, (3, 50))
    truths = rng.integers(0, 2, (3, 50))
    merged = ConfusionCounts()
    parts = []
    for p, t in zip(preds, truths):
        merged.update(p, t)
        parts.append(ConfusionCounts().update(p, t))
    summed = parts[0] + parts[1] + parts[2]
    assert summed == merged


def test_mean_iou_absent_class_convention():
    # all-water prediction and truth: land class absent -> IoU 1 by convention
    counts = ConfusionCounts(tp=10, fp=0, tn=0, fn=0)
    assert mean_iou(counts) == 1.0
    # water entirely missed: water IoU 0, land IoU = tn / (tn + fn)
    counts = ConfusionCounts(tp=0, fp=0, tn=8, fn=2)
    assert mean_iou(counts) == pytest.approx(0.5 * (0.0 + 0.8))


def test_auc_known_values():
    assert auc([0.1, 0.9], [0, 1]) == 1.0
    assert auc([0.9, 0.1], [0, 1]) == 0.0
    assert auc([0.5, 0.5], [0, 1]) == 0.5


def test_auc_single_class_rejected():
    with pytest.raises(SingleClassError):
        auc([0.1, 0.9], [1, 1])


def test_r2_perfect_and_mean_predictor(rng):
    truth = rng.random(100)
    assert r2(truth, truth) == pytest.approx(1.0)
    assert r2(np.full(100, truth.mean()), truth) == pytest.approx(0.0, abs=1e-9)


def test_r2_zero_variance_rejected():
    with pytest.raises(ZeroVarianceError):
        r2(np.zeros(5), np.full(5, 0.3))


def test_r2_accumulator_merges(rng):
    pred = rng.random(300)
    truth = rng.random(300)
    whole = R2Accumulator().update(pred, truth)
    pieces = (
        R2Accumulator().update(pred[:100], truth[:100])
        + R2Accumulator().update(pred[100:250], truth[100:250])
        + R2Accumulator().update(pred[250:], truth[250:])
    )
    assert pieces.result() == pytest.approx(whole.result(), rel=1e-12)
    assert whole.result() == pytest.approx(loop_r2(pred, truth), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), quantize=st.booleans())
def test_metrics_match_oracles(seed, quantize):
    rng = np.random.default_rng(seed)
    pred_mask = rng.integers(0, 2, (10, 10))
    truth_mask = rng.integers(0, 2, (10, 10))
    scores = rng.random(100)
    if quantize:  # force score ties so the tie-handling path is exercised
        scores = np.round(scores, 1)
    labels = rng.integers(0, 2, 100)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]

    counts = ConfusionCounts().update(pred_mask, truth_mask)
    assert accuracy(counts) == pytest.approx(
        loop_accuracy(pred_mask, truth_mask), abs=1e-9
    )
    assert mean_iou(counts) == pytest.approx(
        loop_mean_iou(pred_mask, truth_mask), abs=1e-9
    )
    assert auc(scores, labels) == pytest.approx(
        allpairs_auc(scores, labels), abs=1e-9
    )
    pred_vals = rng.random(100)
    truth_vals = rng.random(100)
    assert r2(pred_vals, truth_vals) == pytest.approx(
        loop_r2(pred_vals, truth_vals), abs=1e-9
    )


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_auc_invariances(seed):
    rng = np.random.default_rng(seed)
    scores = rng.standard_normal(80)
    labels = rng.integers(0, 2, 80)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    base = auc(scores, labels)
    # strictly increasing transforms preserve the ranking, hence the AUC
    assert auc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
    assert auc(3.0 * scores + 11.0, labels) == pytest.approx(base, abs=1e-12)
    # swapping the class labels mirrors the curve
    assert auc(scores, 1 - labels) == pytest.approx(1.0 - base, abs=1e-12)


def test_report_serialization():
    report = MetricsReport(0.9, 0.8, 0.5, 0.4, 1000, 10, extras={"split": "test"})
    d = report.to_dict()
    assert d["format_version"] == 1
    assert d["accuracy"] == 0.9
    assert d["split"] == "test"
