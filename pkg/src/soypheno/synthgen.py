"""Synthetic plot-image cohorts with known maturity ground truth.

Alongside the manifest, cohorts ship a truth.csv (per-plot onset and
decline rate) and a generator_config.json recording every parameter, so
downstream statistics can be checked against the generating process.

Each plot follows a piecewise-linear hue trajectory: flat at hue_green until
senescence onset, declining linearly to hue_brown, then flat. Onset time is
a strictly increasing function of the maturity rating, and the mean decline
gets steeper for later ratings. The brightness channel is solved per pixel
so the plot's mean excess greenness follows a strictly declining line whose
slope is proportional to the profile's decline rate (the greenness floor
falls beyond the last timepoint), which ties extracted slopes linearly to
the rate with no dependence on where the onset sits between samples. Yield
is drawn with a configurable dependence on decline rate so that
steeper-declining plots yield more.
"""

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .datamodel import GENERATIONS, PlotRecord, rating_tenths, write_manifest
from .imageproc import hsv_to_rgb

RM_SPAN = (1.6, 3.9)


@dataclass(frozen=True)
class SenescenceProfile:
    """Per-plot senescence dynamics in hue space."""

    rm_rating: float
    onset_tp: float
    decline_rate: float  # hue units per timepoint, negative
    hue_green: int = 85
    hue_yellow: int = 35
    hue_brown: int = 20
    noise_sd: float = 1.5

    def __post_init__(self):
        if not (180 > self.hue_green > self.hue_yellow > self.hue_brown >= 0):
            raise ValueError("need 180 > hue_green > hue_yellow > hue_brown >= 0")
        if self.decline_rate >= 0:
            raise ValueError("decline_rate must be negative")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")


@dataclass(frozen=True)
class GeneratorConfig:
    """Every knob of the synthetic cohort generator."""

    seed: int = 0
    hue_green: int = 85
    hue_yellow: int = 35
    hue_brown: int = 20
    noise_sd: float = 1.5
    onset_first: float = 1.2   # onset at rating 1.6
    onset_last: float = 7.0    # onset at rating 3.9
    rate_mean_first: float = -9.0   # mean decline at rating 1.6
    rate_mean_last: float = -14.0   # mean decline at rating 3.9
    rate_sd: float = 0.5
    exg_start: float = 200.0      # target mean ExG at the first timepoint
    exg_rate_scale: float = 1.6   # ExG decline per unit of hue decline rate
    exg_floor: float = 20.0
    saturation: float = 0.8
    saturation_jitter: float = 0.04
    value_jitter: float = 0.03
    yield_base: float = 1.0
    yield_per_rate: float = 0.3    # yield gain per unit of (negated) decline rate
    yield_noise_sd: float = 0.15

    def to_dict(self):
        return dataclasses.asdict(self)


def _rm_fraction(rm_rating):
    lo, hi = RM_SPAN
    return (float(rm_rating) - lo) / (hi - lo)


def profile_for_rating(rm_rating, config, rng=None):
    """Senescence profile for a rating.

    Onset is a deterministic, strictly increasing function of the rating;
    the decline rate is drawn around a mean that steepens for later
    ratings. Without an explicit rng the draw is seeded from the config
    seed and the rating, so repeated calls agree.
    """
    tenths = rating_tenths(rm_rating)
    if rng is None:
        rng = np.random.default_rng([config.seed, tenths])
    f = _rm_fraction(rm_rating)
    onset = config.onset_first + f * (config.onset_last - config.onset_first)
    mean_rate = config.rate_mean_first + f * (config.rate_mean_last - config.rate_mean_first)
    rate = mean_rate + config.rate_sd * rng.standard_normal()
    rate = min(rate, -1.0)
    return SenescenceProfile(
        rm_rating=float(rm_rating),
        onset_tp=onset,
        decline_rate=float(rate),
        hue_green=config.hue_green,
        hue_yellow=config.hue_yellow,
        hue_brown=config.hue_brown,
        noise_sd=config.noise_sd,
    )


def hue_at(profile, t):
    """Trajectory hue (half-degrees) at timepoint t; non-increasing in t."""
    raw = profile.hue_green + profile.decline_rate * (np.asarray(t, dtype=float) - profile.onset_tp)
    return np.clip(raw, profile.hue_brown, profile.hue_green)


def exg_at(profile, t, config):
    """Target mean ExG at timepoint t: a line declining from exg_start at
    the first timepoint with slope exg_rate_scale * decline_rate, clipped
    at the floor (which defaults lie beyond an 8-timepoint season)."""
    t = np.asarray(t, dtype=float)
    line = config.exg_start + config.exg_rate_scale * profile.decline_rate * (t - 1.0)
    return np.maximum(line, config.exg_floor)


def _exg_coefficient(hue_degrees):
    """ExG of a unit-chroma HSV color: ExG = 255 * S * V * coefficient."""
    h = (np.asarray(hue_degrees, dtype=np.float64) % 360.0) / 60.0
    x = 1.0 - np.abs(h % 2.0 - 1.0)
    ones = np.ones_like(x)
    zeros = np.zeros_like(x)
    sector = np.floor(h).astype(np.int64) % 6
    r = np.choose(sector, [ones, x, zeros, zeros, x, ones])
    g = np.choose(sector, [x, ones, ones, x, zeros, zeros])
    b = np.choose(sector, [zeros, zeros, x, ones, ones, x])
    return 2.0 * g - r - b


def render_plot_image(profile, t, config, rng, image_size):
    """One plot raster at timepoint t: hue jitter around the trajectory,
    brightness solved to hit the ExG target."""
    width, height = image_size
    if width <= 0 or height <= 0:
        raise ValueError(f"image_size must be positive, got {image_size}")
    shape = (height, width)
    hue_c = float(hue_at(profile, t))
    exg_c = float(exg_at(profile, t, config))

    hue_px = hue_c + profile.noise_sd * rng.standard_normal(shape)
    hue_px = np.clip(hue_px, 0.0, 179.0)
    sat_px = np.clip(config.saturation + config.saturation_jitter * rng.standard_normal(shape), 0.2, 1.0)
    coef = np.maximum(_exg_coefficient(hue_px * 2.0), 0.05)
    val_px = exg_c / (255.0 * sat_px * coef)
    val_px *= 1.0 + config.value_jitter * rng.standard_normal(shape)
    val_px = np.clip(val_px, 0.02, 1.0)
    return hsv_to_rgb(hue_px * 2.0, sat_px, val_px)


def _ratings_for_scheme(scheme):
    """Tenth-ratings grouped by class label, ascending."""
    groups = {}
    for low, high, label in scheme.bins:
        groups.setdefault(label, []).extend(range(low, high + 1))
    return groups


def generate_cohort(n_plots, scheme, timepoints, seed, image_size, out_dir, config=None):
    """Write a synthetic cohort: images, manifest.csv, generator_config.json.

    Classes of the scheme are cycled so the cohort is class-balanced;
    ratings are drawn uniformly over each class's tenths. Deterministic
    given the seed: every plot uses its own child generator.
    """
    if n_plots < 1:
        raise ValueError("n_plots must be >= 1")
    if timepoints < 3:
        raise ValueError("need at least 3 timepoints")
    if image_size[0] <= 0 or image_size[1] <= 0:
        raise ValueError(f"image_size must be positive, got {image_size}")
    if config is None:
        config = GeneratorConfig(seed=seed)

    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)

    groups = _ratings_for_scheme(scheme)
    labels = sorted(groups)
    records = []
    truth = []
    for i in range(n_plots):
        rng = np.random.default_rng([seed, i])
        label = labels[i % len(labels)]
        tenths = int(rng.choice(groups[label]))
        rating = tenths / 10.0
        profile = profile_for_rating(rating, config, rng=rng)

        plot_id = f"SYN_{i:04d}"
        rel_paths = []
        for t in range(1, timepoints + 1):
            img = render_plot_image(profile, t, config, rng, image_size)
            rel = f"images/{plot_id}_tp{t}.png"
            Image.fromarray(img).save(image_dir / f"{plot_id}_tp{t}.png")
            rel_paths.append(rel)

        yield_val = (
            config.yield_base
            - config.yield_per_rate * profile.decline_rate
            + config.yield_noise_sd * rng.standard_normal()
        )
        truth.append((plot_id, rating, profile.onset_tp, profile.decline_rate))
        records.append(
            PlotRecord(
                plot_id=plot_id,
                year=int(rng.choice([2021, 2022, 2023])),
                field_id="SYN",
                generation=str(rng.choice(GENERATIONS)),
                rm_rating=rating,
                yield_mth=max(float(yield_val), 0.0),
                timepoints=tuple(rel_paths),
            )
        )

    write_manifest(out_dir / "manifest.csv", records)
    with open(out_dir / "truth.csv", "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["plot_id", "rm_rating", "onset_tp", "decline_rate"])
        for plot_id, rating, onset, rate in truth:
            writer.writerow([plot_id, f"{rating:.1f}", f"{onset:.4f}", f"{rate:.6f}"])
    params = {
        "n_plots": n_plots,
        "scheme": scheme.name,
        "timepoints": timepoints,
        "seed": seed,
        "image_size": list(image_size),
        "generator": config.to_dict(),
    }
    with open(out_dir / "generator_config.json", "w", encoding="utf-8") as fh:
        json.dump(params, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return records
