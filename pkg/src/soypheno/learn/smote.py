"""Synthetic minority oversampling on feature vectors.

Each minority class is brought up to the majority count by interpolating
between a random class member and one of its k nearest same-class
neighbors. Originals are kept verbatim, synthetics appended after them.
"""

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SmoteInfo:
    """Provenance of one synthetic sample, for auditing."""

    label: int
    base_index: int      # row in the input X
    neighbor_index: int  # row in the input X
    lam: float


def _knn_indices(X, k):
    """Indices of the k nearest neighbors of each row (self excluded)."""
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k]


def smote_balance(X, y, k_neighbors=5, seed=0, return_info=False):
    """Oversample every class to the majority class count.

    X: (n, d) float array with values in [0, 1]; y: (n,) integer labels.
    k_neighbors is clamped to class size - 1. A class with a single
    sample cannot be interpolated and is duplicated instead (warned).
    Deterministic given the seed. Returns (X_out, y_out) with the input
    rows first, or (X_out, y_out, infos) when return_info is set.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be (n, d) and y (n,)")
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")

    labels, counts = np.unique(y, return_counts=True)
    majority = int(counts.max())
    new_rows, new_labels, infos = [], [], []

    for label in labels:
        idx = np.flatnonzero(y == label)
        deficit = majority - idx.size
        if deficit == 0:
            continue
        rng = np.random.default_rng([seed, int(label)])
        if idx.size == 1:
            warnings.warn(
                f"class {label} has a single sample; duplicating it {deficit} times",
                stacklevel=2,
            )
            base = np.full(deficit, idx[0])
            nn = base
            lams = np.zeros(deficit)
        else:
            k = min(k_neighbors, idx.size - 1)
            neighbors = _knn_indices(X[idx], k)
            base_local = rng.integers(0, idx.size, size=deficit)
            nn_local = neighbors[base_local, rng.integers(0, k, size=deficit)]
            base, nn = idx[base_local], idx[nn_local]
            lams = rng.random(deficit)
        new_rows.append(X[base] + lams[:, None] * (X[nn] - X[base]))
        new_labels.append(np.full(deficit, label))
        infos.extend(
            SmoteInfo(label=int(label), base_index=int(b), neighbor_index=int(m), lam=float(l))
            for b, m, l in zip(base, nn, lams)
        )

    if new_rows:
        X_out = np.vstack([X] + new_rows)
        y_out = np.concatenate([y] + new_labels)
    else:
        X_out, y_out = X.copy(), y.copy()
    if return_info:
        return X_out, y_out, infos
    return X_out, y_out
