"""Hue contour phenotype: per-timepoint histograms stacked into one image.

The grid holds hue (columns 0-100, cropped) against acquisition time (rows,
earliest first); pixel counts become color through a monotone-luma lookup
table, after per-plot normalization by the grid's global maximum.
"""

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .imageproc import HUE_BINS, HueHistogram

# Hue bins kept after cropping: 0..100 inclusive.
GRID_COLS = 101

RENDER_SIZE = (256, 256)  # (width, height)

# 1-based acquisition indices per subsetting mode, for 8-timepoint series.
SUBSET_MODES = {
    "all8": (1, 2, 3, 4, 5, 6, 7, 8),
    "dist6": (1, 2, 4, 5, 7, 8),
    "dist4": (1, 3, 5, 7),
    "dist3": (1, 4, 8),
    "last6": (3, 4, 5, 6, 7, 8),
    "last4": (5, 6, 7, 8),
    "last3": (6, 7, 8),
}

_LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class ColormapLUT:
    """256 RGB entries strictly ordered by luma, darkest first."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.uint8)
        object.__setattr__(self, "entries", entries)
        if entries.shape != (256, 3):
            raise ValueError(f"LUT must be 256x3, got {entries.shape}")
        luma = entries.astype(np.float64) @ np.array(_LUMA_WEIGHTS)
        if not (np.diff(luma) > 0).all():
            raise ValueError("LUT luma must be strictly increasing")


def load_lut(path=None):
    """Load a LUT from a 256-line `index,r,g,b` file (default: bundled)."""
    if path is None:
        text = resources.files("soypheno.data").joinpath("contour_lut.csv").read_text()
        lines = text.strip().splitlines()
    else:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().strip().splitlines()
    entries = np.zeros((256, 3), dtype=np.uint8)
    if len(lines) != 256:
        raise ValueError(f"LUT file must have 256 lines, got {len(lines)}")
    for expect, line in enumerate(lines):
        idx, r, g, b = (int(v) for v in line.split(","))
        if idx != expect:
            raise ValueError(f"LUT line {expect} has index {idx}")
        entries[idx] = (r, g, b)
    return ColormapLUT(entries=entries)


@dataclass(frozen=True)
class ContourPhenotype:
    """T x 101 count grid plus its rendered raster for one plot."""

    grid: np.ndarray
    timepoint_indices: tuple
    rendered: np.ndarray
    discarded_fraction: float
    degenerate: bool = False


def temporal_subset(mode, histograms):
    """Select the mode's acquisition indices from an 8-histogram series."""
    if mode not in SUBSET_MODES:
        raise ValueError(f"unknown subset mode {mode!r}; choose from {sorted(SUBSET_MODES)}")
    if len(histograms) != 8:
        raise ValueError(f"temporal subsetting expects 8 histograms, got {len(histograms)}")
    return [histograms[i - 1] for i in SUBSET_MODES[mode]]


def select_timepoints(mode, histograms):
    """Like temporal_subset, but all8 passes any series through whole;
    the reduced modes stay defined only for 8-timepoint series."""
    if mode == "all8" and len(histograms) != 8:
        return list(histograms)
    return temporal_subset(mode, histograms)


def build_grid(histograms):
    """Stack histograms into a T x 101 grid, cropping bins above 100.

    Returns (grid, discarded_fraction) where the fraction reports the share
    of total pixel mass that fell above hue 100.
    """
    if len(histograms) < 2:
        raise ValueError("need at least 2 histograms in chronological order")
    rows = []
    total = 0
    kept = 0
    for hist in histograms:
        if not isinstance(hist, HueHistogram):
            hist = HueHistogram(counts=np.asarray(hist), total_pixels=int(np.sum(hist)))
        if hist.counts.shape != (HUE_BINS,):
            raise ValueError(f"histogram has {hist.counts.shape} bins, expected {HUE_BINS}")
        rows.append(hist.counts[:GRID_COLS])
        total += hist.total_pixels
        kept += int(hist.counts[:GRID_COLS].sum())
    grid = np.stack(rows).astype(np.int64)
    discarded = 0.0 if total == 0 else (total - kept) / total
    return grid, discarded


def bilinear_resample(grid, out_h, out_w):
    """Resample a 2D array to (out_h, out_w), corners mapped to corners."""
    grid = np.asarray(grid, dtype=np.float64)
    in_h, in_w = grid.shape
    ys = np.linspace(0.0, in_h - 1.0, out_h) if in_h > 1 else np.zeros(out_h)
    xs = np.linspace(0.0, in_w - 1.0, out_w) if in_w > 1 else np.zeros(out_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = grid[np.ix_(y0, x0)] * (1 - wx) + grid[np.ix_(y0, x1)] * wx
    bot = grid[np.ix_(y1, x0)] * (1 - wx) + grid[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def render(grid, lut, out_size=RENDER_SIZE):
    """Render a count grid as an RGB raster through the LUT.

    Counts are normalized to [0, 1] by the grid's global maximum, the grid
    is bilinearly upsampled to out_size, and each value v maps to
    lut.entries[floor(v * 255)]. An all-zero grid renders as lut[0]
    everywhere; callers can detect that case from the grid itself.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty grid")
    out_w, out_h = out_size
    peak = grid.max()
    if peak <= 0:
        return np.broadcast_to(lut.entries[0], (out_h, out_w, 3)).copy()
    norm = grid / peak
    scaled = bilinear_resample(norm, out_h, out_w)
    idx = np.floor(scaled * 255.0).astype(np.int64)
    np.clip(idx, 0, 255, out=idx)
    return lut.entries[idx]


def contour_phenotype(histograms, mode="all8", lut=None, out_size=RENDER_SIZE):
    """Full assembly: subset 8 histograms, build the grid, render it."""
    if lut is None:
        lut = load_lut()
    subset = temporal_subset(mode, histograms)
    grid, discarded = build_grid(subset)
    return ContourPhenotype(
        grid=grid,
        timepoint_indices=SUBSET_MODES[mode],
        rendered=render(grid, lut, out_size),
        discarded_fraction=discarded,
        degenerate=bool(grid.max() == 0),
    )


def write_grid_csv(path, grid):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"hue{i}" for i in range(GRID_COLS)])
        for row in np.asarray(grid):
            writer.writerow([int(v) for v in row])


def read_grid_csv(path):
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != GRID_COLS:
            raise ValueError(f"grid CSV must have {GRID_COLS} columns")
        return np.array([[int(v) for v in row] for row in reader], dtype=np.int64)
