import numpy as np
import pytest

from segfig.metrics import (confusion_matrix, format_metrics_table,
                            iou_per_class, mean_iou, pixel_accuracy,
                            reconstruction_metrics)


def brute_force_counts(preds, gts, c):
    """One-vs-rest confusion counts for class c, by explicit iteration."""
    tp = fp = fn = tn = 0
    for p, g in zip(preds.ravel(), gts.ravel()):
        if p == c and g == c:
            tp += 1
        elif p == c and g != c:
            fp += 1
        elif p != c and g == c:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def test_identity_prediction_all_ones():
    gts = np.random.default_rng(0).integers(0, 3, size=(4, 8, 8))
    m = reconstruction_metrics(gts, gts, num_classes=3)
    assert m.macro_precision == 1.0
    assert m.macro_recall == 1.0
    assert m.macro_f1 == 1.0
    assert m.pixel_accuracy == 1.0


def test_constant_background_prediction():
    gts = np.zeros((1, 8, 8), dtype=np.int64)
    gts[0, :4] = 1
    preds = np.zeros_like(gts)
    m = reconstruction_metrics(preds, gts, num_classes=2)
    assert m.pixel_accuracy == 0.5
    assert m.per_class[1]["recall"] == 0.0


def test_matches_brute_force_on_random_maps():
    rng = np.random.default_rng(11)
    for _ in range(100):
        preds = rng.integers(0, 3, size=(8, 8))
        gts = rng.integers(0, 3, size=(8, 8))
        m = reconstruction_metrics(preds[None], gts[None], num_classes=3)
        for c in range(3):
            tp, fp, fn, tn = brute_force_counts(preds, gts, c)
            if tp + fp + fn == 0:
                exp_p = exp_r = 1.0
            else:
                exp_p = tp / (tp + fp) if tp + fp else 0.0
                exp_r = tp / (tp + fn) if tp + fn else 0.0
            assert m.per_class[c]["precision"] == pytest.approx(exp_p)
            assert m.per_class[c]["recall"] == pytest.approx(exp_r)
        acc = (preds == gts).mean()
        assert m.pixel_accuracy == pytest.approx(acc)


def test_iou_matches_brute_force():
    rng = np.random.default_rng(12)
    for _ in range(100):
        preds = rng.integers(0, 3, size=(8, 8))
        gts = rng.integers(0, 3, size=(8, 8))
        ious = iou_per_class(preds[None], gts[None], num_classes=3)
        for c, val in ious.items():
            tp, fp, fn, _ = brute_force_counts(preds, gts, c)
            assert val == pytest.approx(tp / (tp + fp + fn))


def test_confusion_matrix_values():
    preds = np.array([0, 1, 1, 2])
    gts = np.array([0, 1, 2, 2])
    cm = confusion_matrix(preds, gts, num_classes=3)
    assert cm[0, 0] == 1 and cm[1, 1] == 1 and cm[2, 1] == 1 and cm[2, 2] == 1
    assert cm.sum() == 4


def test_macro_f1_bounds():
    rng = np.random.default_rng(13)
    for _ in range(20):
        preds = rng.integers(0, 4, size=(1, 8, 8))
        gts = rng.integers(0, 4, size=(1, 8, 8))
        m = reconstruction_metrics(preds, gts, num_classes=4)
        assert 0.0 <= m.macro_f1 <= 1.0
        for c in range(4):
            p = m.per_class[c]["precision"]
            r = m.per_class[c]["recall"]
            f = m.per_class[c]["f1"]
            if p + r > 0:
                assert f == pytest.approx(2 * p * r / (p + r))
            else:
                assert f == 0.0


def test_class_absent_from_both_counts_as_perfect():
    preds = np.zeros((1, 4, 4), dtype=np.int64)
    gts = np.zeros((1, 4, 4), dtype=np.int64)
    m = reconstruction_metrics(preds, gts, num_classes=3)
    assert m.per_class[2]["precision"] == 1.0
    assert m.per_class[2]["recall"] == 1.0


def test_sample_order_invariance():
    rng = np.random.default_rng(14)
    preds = rng.integers(0, 3, size=(6, 8, 8))
    gts = rng.integers(0, 3, size=(6, 8, 8))
    perm = rng.permutation(6)
    a = reconstruction_metrics(preds, gts, num_classes=3)
    b = reconstruction_metrics(preds[perm], gts[perm], num_classes=3)
    assert a.as_dict() == b.as_dict()


def test_mean_iou_and_pixel_accuracy():
    preds = np.array([[[0, 0], [1, 1]]])
    gts = np.array([[[0, 1], [1, 1]]])
    assert pixel_accuracy(preds, gts) == pytest.approx(0.75)
    # class 0: inter 1 union 2; class 1: inter 2 union 3
    assert mean_iou(preds, gts, num_classes=2) == pytest.approx(
        (0.5 + 2 / 3) / 2)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        reconstruction_metrics(np.zeros((1, 4, 4), dtype=int),
                               np.zeros((1, 5, 5), dtype=int), num_classes=2)


def test_format_metrics_table_alignment():
    rows = [["skin", "0.90", "0.80"], ["hair", "1.00", "0.75"]]
    text = format_metrics_table(rows, headers=["class", "prec", "rec"])
    lines = text.splitlines()
    assert "class" in lines[0]
    assert len(lines) >= 3
