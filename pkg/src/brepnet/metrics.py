"""Pooled per-face accuracy and part IoU.

All faces of all evaluated solids go into one confusion matrix before any
ratio is taken, so solids lacking a class need no special handling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ConfusionTally:
    num_classes: int
    counts: np.ndarray = field(default=None)  # counts[true, predicted]

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.num_classes, self.num_classes), dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "ConfusionTally") -> "ConfusionTally":
        if other.num_classes != self.num_classes:
            raise ValueError("class counts differ")
        return ConfusionTally(self.num_classes, self.counts + other.counts)

    __add__ = merge


def predict(logits: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(logits, axis=1)


def accumulate(tally: ConfusionTally, logits, labels) -> ConfusionTally:
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    u = tally.num_classes
    if logits.shape != (len(labels), u):
        raise ValueError(f"logits shape {logits.shape} does not match {len(labels)} faces x {u} classes")
    if np.any((labels < 0) | (labels >= u)):
        raise ValueError(f"labels must lie in [0, {u})")
    np.add.at(tally.counts, (labels, predict(logits)), 1)
    return tally


def accumulate_predictions(tally: ConfusionTally, predicted, labels) -> ConfusionTally:
    predicted = np.asarray(predicted, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    u = tally.num_classes
    if np.any((labels < 0) | (labels >= u)) or np.any((predicted < 0) | (predicted >= u)):
        raise ValueError(f"classes must lie in [0, {u})")
    np.add.at(tally.counts, (labels, predicted), 1)
    return tally


def accuracy(tally: ConfusionTally) -> float:
    if tally.total == 0:
        raise ValueError("empty tally")
    return float(np.trace(tally.counts) / tally.total)


def iou(tally: ConfusionTally):
    """Per-class IoU (``nan`` for classes never seen nor predicted) and their mean."""
    if tally.total == 0:
        raise ValueError("empty tally")
    c = tally.counts
    tp = np.diag(c).astype(float)
    fp = c.sum(axis=0) - tp
    fn = c.sum(axis=1) - tp
    denom = tp + fp + fn
    per_class = np.full(tally.num_classes, np.nan)
    present = denom > 0
    per_class[present] = tp[present] / denom[present]
    return per_class, float(per_class[present].mean())


def report(tally: ConfusionTally, class_names=None) -> dict:
    names = list(class_names) if class_names is not None else [str(i) for i in range(tally.num_classes)]
    per_class, mean = iou(tally)
    return {
        "faces": tally.total,
        "accuracy": accuracy(tally),
        "mean_iou": mean,
        "per_class_iou": {n: (None if np.isnan(v) else float(v)) for n, v in zip(names, per_class)},
        "confusion": tally.counts.tolist(),
    }


def report_json(tally: ConfusionTally, class_names=None) -> str:
    return json.dumps(report(tally, class_names), indent=2)
