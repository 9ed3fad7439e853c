import csv
import json
import os

import numpy as np
import pytest

from soypheno.cli import main
from soypheno.contour import GRID_COLS


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    """A small synthetic cohort shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    out = root / "cohort"
    rc = main(["synthesize", "--out", str(out), "--plots", "28", "--classes", "seven",
               "--seed", "5", "--width", "24", "--height", "60"])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def encoded(cohort, tmp_path_factory):
    out = tmp_path_factory.mktemp("enc")
    rc = main(["encode", "--manifest", str(cohort / "manifest.csv"), "--out", str(out),
               "--scheme", "seven", "--subset", "all8"])
    assert rc == 0
    return out


class TestSynthesize:
    def test_manifest_row_count(self, cohort):
        with open(cohort / "manifest.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 28
        assert len(list((cohort / "images").glob("*.png"))) == 28 * 8

    def test_creates_missing_output_dir(self, tmp_path):
        target = tmp_path / "deep" / "nested" / "dir"
        rc = main(["synthesize", "--out", str(target), "--plots", "7",
                   "--width", "16", "--height", "24"])
        assert rc == 0
        assert (target / "manifest.csv").is_file()

    def test_invalid_scheme_exits_2(self, tmp_path, capsys):
        rc = main(["synthesize", "--out", str(tmp_path / "x"), "--classes", "nine"])
        assert rc == 2
        assert "unknown scheme" in capsys.readouterr().err

    def test_run_config_written(self, cohort):
        config = json.loads((cohort / "run_config.json").read_text())
        assert config["seed"] == 5
        assert config["plots"] == 28

    def test_env_seed_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PHENO_SEED", "123")
        out = tmp_path / "env"
        assert main(["synthesize", "--out", str(out), "--plots", "7",
                     "--width", "16", "--height", "24"]) == 0
        assert json.loads((out / "run_config.json").read_text())["seed"] == 123

    def test_flag_beats_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PHENO_SEED", "123")
        out = tmp_path / "flag"
        assert main(["synthesize", "--out", str(out), "--plots", "7", "--seed", "9",
                     "--width", "16", "--height", "24"]) == 0
        assert json.loads((out / "run_config.json").read_text())["seed"] == 9


class TestIngest:
    def test_summary(self, cohort, capsys):
        assert main(["ingest", "--manifest", str(cohort / "manifest.csv")]) == 0
        assert "28 records" in capsys.readouterr().out
        report = json.loads((cohort / "ingest_report.json").read_text())
        assert report["records"] == 28
        assert report["flagged_missing_images"] == []

    def test_malformed_manifest_exits_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("plot_id,year\nx,2021\n")
        assert main(["ingest", "--manifest", str(bad)]) == 2

    def test_missing_manifest_exits_2(self, tmp_path):
        assert main(["ingest", "--manifest", str(tmp_path / "nope.csv")]) == 2


class TestEncode:
    def test_png_per_plot(self, encoded):
        pngs = list((encoded / "contours" / "seven" / "all8").glob("*.png"))
        assert len(pngs) == 28

    def test_histograms_csv(self, encoded):
        with open(encoded / "histograms.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:2] == ["plot_id", "tp"]
        assert len(rows) == 1 + 28 * 8

    def test_dist3_grids_have_three_rows(self, cohort, tmp_path):
        out = tmp_path / "enc3"
        assert main(["encode", "--manifest", str(cohort / "manifest.csv"), "--out", str(out),
                     "--subset", "dist3"]) == 0
        grids = sorted((out / "grids" / "dist3").glob("*.csv"))
        assert grids
        with open(grids[0], newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 3
        assert len(rows[0]) == GRID_COLS

    def test_rerun_byte_identical(self, cohort, tmp_path):
        outs = []
        for name in ("e1", "e2"):
            out = tmp_path / name
            assert main(["encode", "--manifest", str(cohort / "manifest.csv"),
                         "--out", str(out), "--workers", "2"]) == 0
            outs.append(out)
        for png in sorted((outs[0] / "contours" / "seven" / "all8").glob("*.png")):
            twin = outs[1] / "contours" / "seven" / "all8" / png.name
            assert png.read_bytes() == twin.read_bytes()
        assert (outs[0] / "histograms.csv").read_bytes() == (outs[1] / "histograms.csv").read_bytes()

    def test_unknown_subset_exits_2(self, cohort, tmp_path):
        rc = main(["encode", "--manifest", str(cohort / "manifest.csv"),
                   "--out", str(tmp_path / "x"), "--subset", "middle4"])
        assert rc == 2


class TestAnalyze:
    def test_reports_written(self, cohort, tmp_path):
        out = tmp_path / "ana"
        assert main(["analyze", "--manifest", str(cohort / "manifest.csv"),
                     "--out", str(out)]) == 0
        assert (out / "slope_report.csv").is_file()
        assert (out / "slope_by_group.csv").is_file()
        assert (out / "correlation_report.csv").is_file()
        with open(out / "slope_report.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 28

    def test_no_yield_skips_correlation(self, cohort, tmp_path, capsys):
        stripped = tmp_path / "cohort_noyield"
        stripped.mkdir()
        (stripped / "images").symlink_to(cohort / "images")
        with open(cohort / "manifest.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        for row in rows[1:]:
            row[5] = ""
        with open(stripped / "manifest.csv", "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
        out = tmp_path / "ana2"
        assert main(["analyze", "--manifest", str(stripped / "manifest.csv"),
                     "--out", str(out)]) == 0
        assert "correlation step skipped" in capsys.readouterr().out
        assert not (out / "correlation_report.csv").exists()

    def test_empty_manifest_exits_2(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("plot_id,year,field_id,generation,rm_rating,yield_mth,tp1\n")
        assert main(["analyze", "--manifest", str(empty), "--out", str(tmp_path / "o")]) == 2


class TestTrainEvalReport:
    def test_train_eval_cycle(self, cohort, encoded, tmp_path):
        run = tmp_path / "run"
        assert main(["train", "--manifest", str(cohort / "manifest.csv"),
                     "--encoded", str(encoded), "--out", str(run),
                     "--seed", "5", "--epochs", "2"]) == 0
        assert (run / "checkpoint.ckpt").is_file()
        assert (run / "split.json").is_file()
        curve = (run / "training_curve.csv").read_text().strip().splitlines()
        assert curve[0] == "epoch,train_loss,val_acc"
        assert len(curve) == 3

        assert main(["evaluate", "--checkpoint", str(run / "checkpoint.ckpt"),
                     "--manifest", str(cohort / "manifest.csv"),
                     "--encoded", str(encoded), "--out", str(run)]) == 0
        report = json.loads((run / "eval_report.json").read_text())
        assert 0.0 <= report["accuracy"] <= 1.0
        assert report["accuracy"] <= report["adjacent_accuracy"]
        assert np.array(report["confusion"]).sum() == report["n_test"]

        assert main(["report", "--run", str(run)]) == 0
        text = (run / "run_report.md").read_text()
        assert "## Evaluation" in text

    def test_hierarchical_train(self, cohort, encoded, tmp_path):
        run = tmp_path / "hier"
        assert main(["train", "--manifest", str(cohort / "manifest.csv"),
                     "--encoded", str(encoded), "--out", str(run),
                     "--seed", "5", "--epochs", "2", "--hierarchical"]) == 0
        assert (run / "checkpoint.ckpt").is_file()
        assert (run / "training_curve_stage1.csv").is_file()
        assert main(["evaluate", "--checkpoint", str(run / "checkpoint.ckpt"),
                     "--manifest", str(cohort / "manifest.csv"),
                     "--encoded", str(encoded), "--out", str(run)]) == 0

    def test_hierarchical_requires_seven(self, cohort, encoded, tmp_path):
        rc = main(["train", "--manifest", str(cohort / "manifest.csv"),
                   "--encoded", str(encoded), "--out", str(tmp_path / "h5"),
                   "--scheme", "five", "--epochs", "1", "--hierarchical"])
        assert rc == 2

    def test_balance_counts(self, cohort, encoded, tmp_path):
        out = tmp_path / "bal"
        assert main(["balance", "--manifest", str(cohort / "manifest.csv"),
                     "--encoded", str(encoded), "--out", str(out), "--seed", "5"]) == 0
        report = json.loads((out / "balance_report.json").read_text())
        counts = set(report["after"].values())
        assert len(counts) == 1  # balanced
        data = np.load(out / "balanced_features.npz")
        assert data["X"].shape[0] == data["y"].shape[0] == sum(report["after"].values())

    def test_subset_study_rows(self, cohort, encoded, tmp_path):
        out = tmp_path / "study"
        assert main(["subset-study", "--manifest", str(cohort / "manifest.csv"),
                     "--encoded", str(encoded), "--out", str(out),
                     "--modes", "all8,dist3", "--seed", "5", "--epochs", "1"]) == 0
        lines = (out / "subset_study.csv").read_text().strip().splitlines()
        assert lines[0] == "mode,train_accuracy,test_accuracy"
        assert len(lines) == 3
        assert lines[1].startswith("all8,") and lines[2].startswith("dist3,")

    def test_subset_study_unknown_mode_exits_2(self, cohort, encoded, tmp_path):
        rc = main(["subset-study", "--manifest", str(cohort / "manifest.csv"),
                   "--encoded", str(encoded), "--out", str(tmp_path / "x"),
                   "--modes", "all8,weird"])
        assert rc == 2

    def test_missing_checkpoint_exits_2(self, cohort, encoded, tmp_path):
        rc = main(["evaluate", "--checkpoint", str(tmp_path / "none.ckpt"),
                   "--manifest", str(cohort / "manifest.csv"),
                   "--encoded", str(encoded), "--out", str(tmp_path / "o")])
        assert rc == 2


class TestConfigFile:
    def test_config_supplies_values_flags_win(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"plots": 7, "seed": 3, "width": 16, "height": 24}))
        out = tmp_path / "from_config"
        assert main(["synthesize", "--config", str(config), "--out", str(out)]) == 0
        rc1 = json.loads((out / "run_config.json").read_text())
        assert rc1["plots"] == 7 and rc1["seed"] == 3

        out2 = tmp_path / "flag_wins"
        assert main(["synthesize", "--config", str(config), "--out", str(out2),
                     "--plots", "14"]) == 0
        rc2 = json.loads((out2 / "run_config.json").read_text())
        assert rc2["plots"] == 14 and rc2["seed"] == 3

    def test_bad_config_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["synthesize", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
