"""Prediction and evaluation: confusion matrix, weighted accuracy, macro metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..sim.cohort import ImpairmentLevel
from .data import LEVELS, Dataset
from .network import NUM_CLASSES, ImpairmentNet


def predict_proba(net: ImpairmentNet, left: np.ndarray, right: np.ndarray, batch_size: int = 64) -> np.ndarray:
    probs = []
    for start in range(0, len(left), batch_size):
        sl = slice(start, start + batch_size)
        probs.append(net.forward_proba(left[sl], right[sl], train=False))
    return np.concatenate(probs) if probs else np.zeros((0, NUM_CLASSES))


def predict(net: ImpairmentNet, left_map: np.ndarray, right_map: np.ndarray) -> ImpairmentLevel:
    """Class of a single (left, right) map pair; ties resolve to lower severity."""
    probs = net.forward_proba(left_map[None], right_map[None], train=False)[0]
    return LEVELS[int(np.argmax(probs))]  # argmax returns the first (lowest-severity) maximum


@dataclass
class EvalReport:
    confusion: List[List[int]]  # rows = true, cols = predicted
    weighted_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: Dict[str, Dict[str, float]]
    n_test: int
    missing_predicted_classes: List[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "confusion": self.confusion,
                "weighted_accuracy": round(self.weighted_accuracy, 6),
                "macro_precision": round(self.macro_precision, 6),
                "macro_recall": round(self.macro_recall, 6),
                "macro_f1": round(self.macro_f1, 6),
                "per_class": {k: {m: round(v, 6) for m, v in d.items()} for k, d in self.per_class.items()},
                "n_test": self.n_test,
                "missing_predicted_classes": self.missing_predicted_classes,
            },
            sort_keys=True,
            indent=2,
        )


def metrics_from_confusion(confusion: np.ndarray) -> EvalReport:
    confusion = np.asarray(confusion, dtype=int)
    n_test = int(confusion.sum())
    if n_test == 0:
        raise ValueError("empty test set")
    class_counts = confusion.sum(axis=1)
    pred_counts = confusion.sum(axis=0)
    tp = np.diag(confusion).astype(float)

    recalls = np.divide(tp, class_counts, out=np.zeros(NUM_CLASSES), where=class_counts > 0)
    precisions = np.divide(tp, pred_counts, out=np.zeros(NUM_CLASSES), where=pred_counts > 0)
    f1 = np.where(precisions + recalls > 0, 2 * precisions * recalls / np.where(precisions + recalls > 0, precisions + recalls, 1), 0.0)

    shares = class_counts / n_test
    weighted_accuracy = float((recalls * shares).sum())
    missing = [LEVELS[i].value for i in range(NUM_CLASSES) if pred_counts[i] == 0]

    per_class = {
        LEVELS[i].value: {
            "precision": float(precisions[i]),
            "recall": float(recalls[i]),
            "f1": float(f1[i]),
            "support": int(class_counts[i]),
        }
        for i in range(NUM_CLASSES)
    }
    return EvalReport(
        confusion=confusion.tolist(),
        weighted_accuracy=weighted_accuracy,
        macro_precision=float(precisions.mean()),
        macro_recall=float(recalls.mean()),
        macro_f1=float(f1.mean()),
        per_class=per_class,
        n_test=n_test,
        missing_predicted_classes=missing,
    )


def evaluate(net: ImpairmentNet, dataset: Dataset, idx: Optional[np.ndarray] = None) -> EvalReport:
    """Evaluate on the dataset's test partition (or an explicit index set)."""
    idx = dataset.test_idx if idx is None else idx
    left, right, labels = dataset.subset(np.asarray(idx))
    if len(labels) == 0:
        raise ValueError("empty test set")
    probs = predict_proba(net, left, right)
    preds = np.argmax(probs, axis=1)
    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=int)
    for t, p in zip(labels, preds):
        confusion[t, p] += 1
    return metrics_from_confusion(confusion)
