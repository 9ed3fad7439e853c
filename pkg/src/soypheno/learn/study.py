"""Timepoint-subset study: same split and hyperparameters, varying modes."""

import csv

import numpy as np

from ..contour import build_grid, select_timepoints
from .evaluate import evaluate
from .features import FEATURE_SHAPE, feature_matrix
from .smote import smote_balance
from .train import train


def features_for_mode(histograms_by_plot, plot_ids, mode, shape=FEATURE_SHAPE):
    """Feature matrix for the given plots under one subset mode."""
    grids = []
    for pid in plot_ids:
        subset = select_timepoints(mode, histograms_by_plot[pid])
        grid, _ = build_grid(subset)
        grids.append(grid)
    return feature_matrix(grids, shape)


def subset_study(histograms_by_plot, labels_by_plot, split, modes, n_classes,
                 hyper=None, seed=0, k_neighbors=5):
    """Train one model per subset mode on a shared split.

    Returns rows of (mode, train_accuracy, test_accuracy), in the order
    the modes were given. Deterministic for a fixed seed.
    """
    rows = []
    ids = {
        "train": list(split.train_ids),
        "val": list(split.val_ids),
        "test": list(split.test_ids),
    }
    y = {part: np.array([labels_by_plot[p] for p in ids[part]]) for part in ids}
    for mode in modes:
        X = {part: features_for_mode(histograms_by_plot, ids[part], mode) for part in ids}
        Xb, yb = smote_balance(X["train"], y["train"], k_neighbors=k_neighbors, seed=seed)
        model, _ = train(Xb, yb, X["val"], y["val"], n_classes, hyper, seed=seed)
        train_acc = float((model.predict_labels(X["train"]) == y["train"]).mean())
        test_acc = evaluate(model, X["test"], y["test"], n_classes).accuracy
        rows.append((mode, train_acc, test_acc))
    return rows


def write_subset_study(path, rows):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["mode", "train_accuracy", "test_accuracy"])
        for mode, train_acc, test_acc in rows:
            writer.writerow([mode, f"{train_acc:.4f}", f"{test_acc:.4f}"])
