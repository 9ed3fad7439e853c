import numpy as np
import pytest

from soypheno.contour import build_grid, temporal_subset
from soypheno.datamodel import get_scheme, load_manifest
from soypheno.imageproc import hue_histogram, mean_exg
from soypheno.synthgen import (
    GeneratorConfig,
    SenescenceProfile,
    exg_at,
    generate_cohort,
    hue_at,
    profile_for_rating,
    render_plot_image,
)


@pytest.fixture(scope="module")
def config():
    return GeneratorConfig(seed=3)


class TestProfiles:
    def test_onset_strictly_increasing(self, config):
        onsets = [profile_for_rating(t / 10, config).onset_tp for t in range(16, 40)]
        assert all(b > a for a, b in zip(onsets, onsets[1:]))

    def test_deterministic_for_same_rating(self, config):
        a = profile_for_rating(2.5, config)
        b = profile_for_rating(2.5, config)
        assert a == b

    def test_decline_steeper_for_later_ratings(self, config):
        # Monte Carlo over the configured distribution.
        rng_a = np.random.default_rng(100)
        rng_b = np.random.default_rng(100)
        early = np.mean([profile_for_rating(1.6, config, rng=rng_a).decline_rate for _ in range(1000)])
        late = np.mean([profile_for_rating(3.9, config, rng=rng_b).decline_rate for _ in range(1000)])
        assert late < early < 0

    def test_profile_invariants_enforced(self):
        with pytest.raises(ValueError):
            SenescenceProfile(rm_rating=2.0, onset_tp=2.0, decline_rate=1.0)
        with pytest.raises(ValueError):
            SenescenceProfile(rm_rating=2.0, onset_tp=2.0, decline_rate=-5.0,
                              hue_green=30, hue_yellow=35, hue_brown=20)


class TestTrajectories:
    def test_hue_non_increasing(self, config):
        profile = profile_for_rating(2.7, config)
        ts = np.linspace(1, 8, 50)
        hues = hue_at(profile, ts)
        assert (np.diff(hues) <= 0).all()
        assert hues.max() <= profile.hue_green
        assert hues.min() >= profile.hue_brown

    def test_early_plot_browner_than_late_plot(self):
        early = SenescenceProfile(rm_rating=1.6, onset_tp=2.0, decline_rate=-10.0)
        late = SenescenceProfile(rm_rating=3.9, onset_tp=6.0, decline_rate=-10.0)
        assert hue_at(early, 8) < hue_at(late, 6)

    def test_exg_linear_in_time_with_rate_slope(self, config):
        profile = profile_for_rating(2.0, config)
        assert exg_at(profile, 1.0, config) == config.exg_start
        expected_slope = config.exg_rate_scale * profile.decline_rate
        for t in (2.0, 5.0, 8.0):
            assert exg_at(profile, t, config) == pytest.approx(
                config.exg_start + expected_slope * (t - 1.0)
            )
        # strictly decreasing over the sampled season; floor beyond it
        values = exg_at(profile, np.arange(1, 9, dtype=float), config)
        assert (np.diff(values) < 0).all()
        assert values.min() > config.exg_floor


class TestImages:
    def test_mean_exg_tracks_target(self, config):
        profile = profile_for_rating(2.5, config)
        rng = np.random.default_rng(7)
        for t in (1, 4, 6, 8):
            img = render_plot_image(profile, t, config, rng, (80, 120))
            assert mean_exg(img) == pytest.approx(exg_at(profile, t, config), abs=6.0)

    def test_mean_hue_non_increasing_over_time(self, config):
        profile = profile_for_rating(3.0, config)
        rng = np.random.default_rng(8)
        means = []
        for t in range(1, 9):
            img = render_plot_image(profile, t, config, rng, (60, 100))
            hist = hue_histogram(img)
            means.append((hist.counts * np.arange(180)).sum() / hist.total_pixels)
        diffs = np.diff(means)
        assert (diffs <= 0.5).all()  # sampling jitter only on flat segments

    def test_zero_size_rejected(self, config):
        profile = profile_for_rating(2.0, config)
        with pytest.raises(ValueError):
            render_plot_image(profile, 1, config, np.random.default_rng(0), (0, 10))


class TestCohort:
    def test_counts_and_manifest(self, tmp_path):
        records = generate_cohort(7, get_scheme("seven"), 8, seed=1, image_size=(24, 60),
                                  out_dir=tmp_path)
        assert len(records) == 7
        images = list((tmp_path / "images").glob("*.png"))
        assert len(images) == 56
        assert (tmp_path / "generator_config.json").is_file()
        back = load_manifest(tmp_path / "manifest.csv")
        assert len(back) == 7
        assert all(r.valid for r in back)
        labels = sorted({r.rm_rating for r in back})
        assert len(labels) == 7  # one rating per class, round-robin

    def test_deterministic_images(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        generate_cohort(3, get_scheme("five"), 8, seed=9, image_size=(20, 40), out_dir=a)
        generate_cohort(3, get_scheme("five"), 8, seed=9, image_size=(20, 40), out_dir=b)
        for img in sorted((a / "images").glob("*.png")):
            twin = b / "images" / img.name
            assert img.read_bytes() == twin.read_bytes()
        assert (a / "manifest.csv").read_bytes() == (b / "manifest.csv").read_bytes()

    def test_noise_free_classes_distinguishable(self, tmp_path):
        # Contour grids of distinct classes differ in at least one cell
        # when pixel noise is off.
        config = GeneratorConfig(seed=5, noise_sd=0.0, saturation_jitter=0.0, value_jitter=0.0)
        records = generate_cohort(7, get_scheme("seven"), 8, seed=5, image_size=(30, 80),
                                  out_dir=tmp_path, config=config)
        from PIL import Image

        grids = []
        for rec in records:
            hists = []
            for rel in rec.timepoints:
                img = np.asarray(Image.open(tmp_path / rel))
                hists.append(hue_histogram(img))
            grids.append(build_grid(temporal_subset("all8", hists))[0])
        for i in range(len(grids)):
            for j in range(i + 1, len(grids)):
                assert (grids[i] != grids[j]).any()

    def test_invalid_args(self, tmp_path):
        with pytest.raises(ValueError):
            generate_cohort(0, get_scheme("seven"), 8, 1, (10, 10), tmp_path)
        with pytest.raises(ValueError):
            generate_cohort(5, get_scheme("seven"), 2, 1, (10, 10), tmp_path)
        with pytest.raises(ValueError):
            generate_cohort(5, get_scheme("seven"), 8, 1, (0, 10), tmp_path)

    def test_yield_increases_with_steeper_decline(self, tmp_path):
        import csv

        records = generate_cohort(80, get_scheme("seven"), 4, seed=13, image_size=(10, 20),
                                  out_dir=tmp_path)
        with open(tmp_path / "truth.csv", newline="") as fh:
            rates = {row["plot_id"]: float(row["decline_rate"]) for row in csv.DictReader(fh)}
        pairs = np.array([(rates[r.plot_id], r.yield_mth) for r in records])
        r = np.corrcoef(pairs[:, 0], pairs[:, 1])[0, 1]
        assert r < -0.5  # yield built as base - k * decline_rate + noise
        assert min(p[1] for p in pairs) > 0
