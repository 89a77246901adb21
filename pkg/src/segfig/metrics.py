"""Segmentation quality metrics: per-class PRF, pixel accuracy, IoU."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ClassMetrics:
    pixel_accuracy: float
    per_class: dict                 # class index -> {accuracy, precision, recall, f1}
    macro_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def as_dict(self) -> dict:
        return {
            "pixel_accuracy": self.pixel_accuracy,
            "macro_accuracy": self.macro_accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": {str(k): v for k, v in self.per_class.items()},
        }


def confusion_matrix(preds: np.ndarray, gts: np.ndarray, num_classes: int) -> np.ndarray:
    preds = np.asarray(preds).ravel()
    gts = np.asarray(gts).ravel()
    if preds.shape != gts.shape:
        raise ValueError("prediction and ground-truth shapes differ")
    return np.bincount(gts * num_classes + preds,
                       minlength=num_classes ** 2).reshape(num_classes, num_classes)


def reconstruction_metrics(preds: np.ndarray, gts: np.ndarray,
                           num_classes: int) -> ClassMetrics:
    """Per-class one-vs-rest precision/recall/F1 with macro averages.

    Classes absent from both ground truth and predictions count as perfect
    (precision = recall = 1); absent from one side only contribute 0.
    F1 is 0 when precision + recall is 0.
    """
    cm = confusion_matrix(preds, gts, num_classes)
    total = cm.sum()
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    tn = total - tp - fp - fn
    per_class = {}
    for c in range(num_classes):
        if tp[c] + fp[c] + fn[c] == 0:
            prec = rec = 1.0
        else:
            prec = tp[c] / (tp[c] + fp[c]) if tp[c] + fp[c] > 0 else 0.0
            rec = tp[c] / (tp[c] + fn[c]) if tp[c] + fn[c] > 0 else 0.0
        f1 = (2 * prec * rec / (prec + rec)) if prec + rec > 0 else 0.0
        acc = (tp[c] + tn[c]) / total
        per_class[c] = {"accuracy": float(acc), "precision": float(prec),
                        "recall": float(rec), "f1": float(f1)}
    macro = {k: float(np.mean([m[k] for m in per_class.values()]))
             for k in ("accuracy", "precision", "recall", "f1")}
    return ClassMetrics(
        pixel_accuracy=float(tp.sum() / total),
        per_class=per_class,
        macro_accuracy=macro["accuracy"],
        macro_precision=macro["precision"],
        macro_recall=macro["recall"],
        macro_f1=macro["f1"],
    )


def iou_per_class(preds: np.ndarray, gts: np.ndarray, num_classes: int) -> dict:
    """Class index -> TP / (TP + FP + FN), for classes present on either side."""
    cm = confusion_matrix(preds, gts, num_classes)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    out = {}
    for c in range(num_classes):
        denom = tp[c] + fp[c] + fn[c]
        if denom > 0:
            out[c] = float(tp[c] / denom)
    return out


def mean_iou(preds: np.ndarray, gts: np.ndarray, num_classes: int) -> float:
    per = iou_per_class(preds, gts, num_classes)
    return float(np.mean(list(per.values()))) if per else 1.0


def pixel_accuracy(preds: np.ndarray, gts: np.ndarray) -> float:
    preds = np.asarray(preds)
    gts = np.asarray(gts)
    if preds.shape != gts.shape:
        raise ValueError("prediction and ground-truth shapes differ")
    return float((preds == gts).mean())


def format_metrics_table(rows: list, headers: list) -> str:
    """Aligned plain-text table; rows are lists of strings."""
    widths = [max(len(str(r[i])) for r in [headers] + rows)
              for i in range(len(headers))]
    def fmt(row):
        return " | ".join(str(v).ljust(w) for v, w in zip(row, widths))
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(headers), sep] + [fmt(r) for r in rows])
