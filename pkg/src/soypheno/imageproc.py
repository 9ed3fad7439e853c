"""Per-image preprocessing and color feature extraction.

All functions are pure and operate on RGB rasters held as numpy arrays of
shape (height, width, 3), dtype uint8. Hue follows the half-degree
convention: degrees / 2, truncated to an integer in [0, 180).
"""

import csv
from dataclasses import dataclass

import numpy as np
from PIL import Image

# Channels at or above this value on R, G and B count as white padding.
WHITE_THRESHOLD = 250

# Standardized plot raster: 300 px wide, 1000 px tall.
STANDARD_WIDTH = 300
STANDARD_HEIGHT = 1000

HUE_BINS = 180


@dataclass(frozen=True)
class HueHistogram:
    """Pixel counts per half-degree hue bin (bin h covers [h, h+1))."""

    counts: np.ndarray
    total_pixels: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.shape != (HUE_BINS,):
            raise ValueError(f"expected {HUE_BINS} hue bins, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("negative bin count")
        if int(counts.sum()) != self.total_pixels:
            raise ValueError("bin counts do not sum to total_pixels")


def _as_rgb_array(image):
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB raster, got shape {arr.shape}")
    return arr


def crop_white_border(image, threshold=WHITE_THRESHOLD):
    """Crop to the minimal bounding box of non-white pixels.

    A pixel is white when all three channels are >= threshold. Returns
    (cropped, all_white); when every pixel is white the input is returned
    unchanged with the flag set.
    """
    arr = _as_rgb_array(image)
    if arr.size == 0:
        raise ValueError("empty image")
    nonwhite = (arr < threshold).any(axis=2)
    rows = np.flatnonzero(nonwhite.any(axis=1))
    cols = np.flatnonzero(nonwhite.any(axis=0))
    if rows.size == 0:
        return arr, True
    return arr[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1], False


def standardize(image):
    """Resize to the standard 300x1000 raster (bilinear).

    Orientation is normalized first: if the input is wider than tall it is
    transposed, so the longer side always maps to the 1000 px axis.
    """
    arr = _as_rgb_array(image)
    h, w = arr.shape[:2]
    if h == 0 or w == 0:
        raise ValueError("empty image")
    if w > h:
        arr = arr.transpose(1, 0, 2)
    out = Image.fromarray(np.ascontiguousarray(arr)).resize(
        (STANDARD_WIDTH, STANDARD_HEIGHT), Image.BILINEAR
    )
    return np.asarray(out)


def rgb_to_hsv_arrays(image):
    """Vectorized RGB -> (hue_degrees, saturation, value).

    hue in [0, 360) float64, saturation and value in [0, 1]. Achromatic
    pixels (max == min) get hue 0 and saturation 0.
    """
    arr = _as_rgb_array(image).astype(np.float64)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    mx = arr.max(axis=2)
    mn = arr.min(axis=2)
    c = mx - mn
    safe_c = np.where(c == 0, 1.0, c)

    hue = np.zeros_like(mx)
    is_r = (mx == r) & (c > 0)
    is_g = (mx == g) & ~is_r & (c > 0)
    is_b = (c > 0) & ~is_r & ~is_g
    hue = np.where(is_r, ((g - b) / safe_c) % 6.0, hue)
    hue = np.where(is_g, (b - r) / safe_c + 2.0, hue)
    hue = np.where(is_b, (r - g) / safe_c + 4.0, hue)
    hue *= 60.0

    sat = np.where(mx == 0, 0.0, c / np.where(mx == 0, 1.0, mx))
    val = mx / 255.0
    return hue, sat, val


def hsv_to_rgb(hue_degrees, saturation, value):
    """Vectorized HSV -> uint8 RGB. Inputs broadcast; hue in degrees."""
    h = (np.asarray(hue_degrees, dtype=np.float64) % 360.0) / 60.0
    s = np.clip(np.asarray(saturation, dtype=np.float64), 0.0, 1.0)
    v = np.clip(np.asarray(value, dtype=np.float64), 0.0, 1.0)
    h, s, v = np.broadcast_arrays(h, s, v)

    c = v * s
    x = c * (1.0 - np.abs(h % 2.0 - 1.0))
    m = v - c
    zeros = np.zeros_like(c)

    sector = np.floor(h).astype(np.int64) % 6
    r = np.choose(sector, [c, x, zeros, zeros, x, c])
    g = np.choose(sector, [x, c, c, x, zeros, zeros])
    b = np.choose(sector, [zeros, zeros, x, c, c, x])

    rgb = np.stack([r + m, g + m, b + m], axis=-1)
    return np.round(rgb * 255.0).astype(np.uint8)


def hue_channel(image):
    """Integer hue per pixel in [0, 180): degrees halved, truncated.

    Computed in exact integer arithmetic: floor(30 * chroma_ratio) avoids
    the float rounding that can misplace hues sitting on bin edges.
    """
    arr = np.ascontiguousarray(_as_rgb_array(image).transpose(2, 0, 1)).astype(np.int16)
    r, g, b = arr[0], arr[1], arr[2]
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    c = mx - mn
    achromatic = c == 0
    c[achromatic] = 1
    is_r = mx == r
    is_g = (mx == g) & ~is_r
    num = np.where(is_r, g - b, np.where(is_g, b - r, r - g))
    base = np.where(is_r, np.int16(0), np.where(is_g, np.int16(60), np.int16(120)))
    hue = (30 * num) // c
    hue += base
    hue %= 180
    hue[achromatic] = 0
    return hue


def rgb_to_hue(pixel):
    """Half-degree hue of a single (R, G, B) pixel; achromatic -> 0."""
    arr = np.asarray(pixel, dtype=np.uint8).reshape(1, 1, 3)
    return int(hue_channel(arr)[0, 0])


def hue_histogram(image):
    """Count pixels per hue bin over the whole raster (no masking)."""
    hues = hue_channel(image)
    counts = np.bincount(hues.ravel(), minlength=HUE_BINS)
    return HueHistogram(counts=counts, total_pixels=int(hues.size))


def mean_exg(image):
    """Mean per-pixel excess greenness 2G - R - B (signed, -510..510)."""
    arr = _as_rgb_array(image).astype(np.int64)
    if arr.size == 0:
        raise ValueError("empty image")
    exg = 2 * arr[..., 1] - arr[..., 0] - arr[..., 2]
    return float(exg.mean())


def write_histograms_csv(path, rows):
    """rows: iterable of (plot_id, tp_index, HueHistogram)."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["plot_id", "tp"] + [f"bin{i}" for i in range(HUE_BINS)])
        for plot_id, tp, hist in rows:
            writer.writerow([plot_id, tp] + [int(v) for v in hist.counts])


def read_histograms_csv(path):
    """Histograms keyed by plot_id, each an ordered list over timepoints."""
    by_plot = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != 2 + HUE_BINS:
            raise ValueError(f"{path}: expected {2 + HUE_BINS} columns")
        for row in reader:
            counts = np.array([int(v) for v in row[2:]], dtype=np.int64)
            hist = HueHistogram(counts=counts, total_pixels=int(counts.sum()))
            by_plot.setdefault(row[0], []).append((int(row[1]), hist))
    return {
        pid: [h for _, h in sorted(items)]
        for pid, items in by_plot.items()
    }
