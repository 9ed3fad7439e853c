"""Classifier inputs derived from contour grids.

The model consumes the count grid itself (normalized, resampled to a fixed
grayscale shape), not the colormapped render; the render stays an archival
artifact.
"""

from dataclasses import dataclass

import numpy as np

from ..contour import bilinear_resample

FEATURE_SHAPE = (32, 64)  # (rows=time, cols=hue)


@dataclass(frozen=True)
class FeatureVector:
    """One classifier input: values in [0, 1] plus its class label."""

    values: np.ndarray
    label: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("feature values must lie in [0, 1]")


def grid_to_features(grid, shape=FEATURE_SHAPE):
    """Normalize a T x 101 grid by its peak and resample to `shape`, flat."""
    grid = np.asarray(grid, dtype=np.float64)
    peak = grid.max()
    if peak > 0:
        grid = grid / peak
    return bilinear_resample(grid, shape[0], shape[1]).reshape(-1)


def feature_matrix(grids, shape=FEATURE_SHAPE):
    return np.stack([grid_to_features(g, shape) for g in grids])
