"""Training-time augmentation: color jitter and random masking.

No rotation or cropping: both image axes carry ordered meaning (hue and
acquisition time), so only value jitter and occlusion are safe.
"""

from dataclasses import dataclass

import numpy as np

from ..imageproc import hsv_to_rgb, rgb_to_hsv_arrays


@dataclass(frozen=True)
class AugmentParams:
    brightness: float = 0.0
    contrast: float = 0.1
    saturation: float = 0.2
    hue_shift: float = 0.1   # fraction of the full hue wheel
    mask_count: int = 0
    mask_size: tuple = (4, 8)  # (height, width)

    def __post_init__(self):
        for name in ("brightness", "contrast", "saturation", "hue_shift"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.mask_count < 0:
            raise ValueError("mask_count must be non-negative")


def _jitter_factor(rng, amount):
    return 1.0 + rng.uniform(-amount, amount)


def augment(image, params, seed):
    """Jittered copy of a grayscale (H, W) float or RGB (H, W, 3) raster.

    Saturation and hue jitter apply only to RGB inputs; grayscale inputs
    get brightness/contrast jitter and masking. Each enabled mask zeroes
    one mask_size rectangle at a random position. Zero parameters skip
    their stage entirely, so all-zero params return the input unchanged.
    """
    rng = np.random.default_rng(seed)
    arr = np.asarray(image)
    rgb = arr.ndim == 3
    if not rgb and arr.ndim != 2:
        raise ValueError(f"expected (H, W) or (H, W, 3) raster, got {arr.shape}")
    lo, hi = (0.0, 255.0) if arr.dtype == np.uint8 else (0.0, 1.0)
    out = arr.astype(np.float64)

    if params.brightness > 0:
        out = out * _jitter_factor(rng, params.brightness)
    if params.contrast > 0:
        mean = out.mean()
        out = mean + _jitter_factor(rng, params.contrast) * (out - mean)
    if rgb and params.saturation > 0:
        gray = out @ np.array([0.299, 0.587, 0.114])
        out = gray[..., None] + _jitter_factor(rng, params.saturation) * (out - gray[..., None])
    if rgb and params.hue_shift > 0:
        shift = rng.uniform(-params.hue_shift, params.hue_shift) * 360.0
        h, s, v = rgb_to_hsv_arrays(np.clip(out, 0, 255).astype(np.uint8))
        out = hsv_to_rgb(h + shift, s, v).astype(np.float64)

    out = np.clip(out, lo, hi)

    if params.mask_count > 0:
        mh, mw = params.mask_size
        h, w = out.shape[:2]
        if mh > h or mw > w:
            raise ValueError(f"mask {params.mask_size} larger than image {(h, w)}")
        for _ in range(params.mask_count):
            top = int(rng.integers(0, h - mh + 1))
            left = int(rng.integers(0, w - mw + 1))
            out[top:top + mh, left:left + mw] = 0.0

    if arr.dtype == np.uint8:
        return np.round(out).astype(np.uint8)
    return out.astype(arr.dtype)
