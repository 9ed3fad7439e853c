"""Evaluation metrics and reports for maturity classifiers."""

import csv
import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    """Confusion matrix plus exact, adjacent and top-2 accuracies.

    adjacent_accuracy counts predictions at most one class from the truth
    as correct. top2_prob_accuracy counts the truth being either the
    prediction or the highest-probability other class; for probability
    argmax models that set is exactly the two most probable classes.
    """

    confusion: np.ndarray  # (K, K), rows = true label, cols = predicted
    accuracy: float
    adjacent_accuracy: float
    top2_prob_accuracy: float
    precision: tuple  # per class, 1..K
    recall: tuple
    n_test: int

    def __post_init__(self):
        confusion = np.asarray(self.confusion, dtype=np.int64)
        object.__setattr__(self, "confusion", confusion)
        k = confusion.shape[0]
        if confusion.shape != (k, k):
            raise ValueError("confusion matrix must be square")
        total = int(confusion.sum())
        if total != self.n_test:
            raise ValueError("confusion total does not match n_test")
        if total and int(np.trace(confusion)) / total != self.accuracy:
            raise ValueError("accuracy must equal confusion trace / total")
        if self.accuracy > self.adjacent_accuracy + 1e-12:
            raise ValueError("accuracy cannot exceed adjacent accuracy")
        if self.accuracy > self.top2_prob_accuracy + 1e-12:
            raise ValueError("accuracy cannot exceed top-2 accuracy")

    def to_dict(self):
        return {
            "n_test": self.n_test,
            "accuracy": self.accuracy,
            "adjacent_accuracy": self.adjacent_accuracy,
            "top2_prob_accuracy": self.top2_prob_accuracy,
            "precision": list(self.precision),
            "recall": list(self.recall),
            "confusion": self.confusion.tolist(),
        }


def report_from_predictions(probs, pred, y_true, n_classes):
    """Assemble an EvalReport; pred and y_true are 1-based labels."""
    probs = np.asarray(probs, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.int64)
    y_true = np.asarray(y_true, dtype=np.int64)
    if len(y_true) == 0:
        raise ValueError("empty test set")

    masked = probs.copy()
    masked[np.arange(len(pred)), pred - 1] = -np.inf
    second = masked.argmax(axis=1) + 1

    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (y_true - 1, pred - 1), 1)
    n = len(y_true)
    accuracy = int(np.trace(confusion)) / n
    adjacent = float((np.abs(pred - y_true) <= 1).mean())
    top2 = float(((pred == y_true) | (second == y_true)).mean())

    col = confusion.sum(axis=0)
    row = confusion.sum(axis=1)
    precision = np.where(col > 0, np.diag(confusion) / np.maximum(col, 1), 0.0)
    recall = np.where(row > 0, np.diag(confusion) / np.maximum(row, 1), 0.0)

    return EvalReport(
        confusion=confusion,
        accuracy=accuracy,
        adjacent_accuracy=adjacent,
        top2_prob_accuracy=top2,
        precision=tuple(float(v) for v in precision),
        recall=tuple(float(v) for v in recall),
        n_test=n,
    )


def evaluate(model, X_test, y_test, n_classes):
    """Evaluate a classifier exposing predict_proba; labels are 1-based.

    The prediction comes from the model's own decision rule
    (predict_labels when present, else the probability argmax), so routed
    hierarchy predictions define the confusion matrix.
    """
    if len(np.asarray(y_test)) == 0:
        raise ValueError("empty test set")
    probs = np.asarray(model.predict_proba(X_test), dtype=np.float64)
    if hasattr(model, "predict_labels"):
        pred = np.asarray(model.predict_labels(X_test))
    else:
        pred = probs.argmax(axis=1) + 1
    return report_from_predictions(probs, pred, y_test, n_classes)


def write_eval_report(json_path, csv_path, report):
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(csv_path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        k = report.confusion.shape[0]
        writer.writerow(["true\\pred"] + [str(i) for i in range(1, k + 1)])
        for i, row in enumerate(report.confusion, start=1):
            writer.writerow([i] + [int(v) for v in row])
