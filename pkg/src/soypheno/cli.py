"""Command-line pipeline: synthesize, ingest, encode, analyze, balance,
train, evaluate, subset-study, report.

Every command takes an optional JSON config file; explicit flags override
config values, and the PHENO_SEED environment variable overrides the config
seed (explicit --seed wins over both). Each output directory receives a
run_config.json with the effective settings, sufficient to replay the run.

Exit codes: 0 success, 1 runtime failure, 2 configuration or validation
error.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from . import contour, datamodel, imageproc, phenostats, synthgen
from .learn import (
    Hyperparams,
    evaluate,
    feature_matrix,
    load_checkpoint,
    save_checkpoint,
    smote_balance,
    subset_study,
    train,
    train_hierarchical,
    write_eval_report,
    write_subset_study,
)


class ConfigError(ValueError):
    """Bad configuration or input validation; maps to exit code 2."""


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None


def _setting(args, config, name, default):
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    return config.get(name, default)


def _scheme_setting(args, config, key="scheme", default="seven"):
    name = _setting(args, config, key, default)
    try:
        return datamodel.get_scheme(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _resolve_seed(args, config):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("PHENO_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"PHENO_SEED must be an integer, got {env!r}") from None
    return int(config.get("seed", 0))


def _write_run_config(out_dir, settings):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "run_config.json", "w", encoding="utf-8") as fh:
        json.dump(settings, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_records(manifest, require_labels=False):
    manifest = Path(manifest)
    if not manifest.is_file():
        raise ConfigError(f"manifest not found: {manifest}")
    records = datamodel.load_manifest(manifest)
    if not records:
        raise ConfigError(f"manifest {manifest} has no records")
    invalid = [r.plot_id for r in records if not r.valid]
    if invalid:
        print(f"skipping {len(invalid)} plot(s) with missing images: "
              f"{', '.join(invalid[:5])}{'...' if len(invalid) > 5 else ''}")
    records = [r for r in records if r.valid]
    if require_labels:
        records = [r for r in records if r.labeled]
    if not records:
        raise ConfigError(f"manifest {manifest} has no usable records")
    return records


def _map_plots(records, fn, workers):
    """Apply fn to each record; results keyed and ordered by plot_id."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(zip((r.plot_id for r in records), pool.map(fn, records)))
    else:
        results = {rec.plot_id: fn(rec) for rec in records}
    return {pid: results[pid] for pid in sorted(results)}


def _plot_histograms(manifest_dir, rec):
    hists = []
    for rel in rec.timepoints:
        img = np.asarray(Image.open(manifest_dir / rel).convert("RGB"))
        cropped, blank = imageproc.crop_white_border(img)
        if blank:
            print(f"warning: {rec.plot_id} {rel} is entirely white")
        hists.append(imageproc.hue_histogram(imageproc.standardize(cropped)))
    return hists


def _subset_histograms(mode, hists):
    try:
        return contour.select_timepoints(mode, hists)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _hyper_from(args, config):
    return Hyperparams(
        learning_rate=float(_setting(args, config, "lr", 1e-4)),
        batch_size=int(_setting(args, config, "batch", 32)),
        epochs=int(_setting(args, config, "epochs", 50)),
        hidden_units=int(_setting(args, config, "hidden-units", 64)),
        input_gain=float(_setting(args, config, "input-gain", 32.0)),
    )


def _features_by_split(encoded_dir, records, scheme, mode, split):
    hists = imageproc.read_histograms_csv(Path(encoded_dir) / "histograms.csv")
    missing = [r.plot_id for r in records if r.plot_id not in hists]
    if missing:
        raise ConfigError(f"histograms.csv lacks {len(missing)} plot(s), e.g. {missing[0]}; re-run encode")
    labels = {r.plot_id: datamodel.assign_label(r.rm_rating, scheme) for r in records}
    out = {}
    for part, ids in (("train", split.train_ids), ("val", split.val_ids), ("test", split.test_ids)):
        grids = [contour.build_grid(_subset_histograms(mode, hists[pid]))[0] for pid in ids]
        out[part] = (feature_matrix(grids), np.array([labels[pid] for pid in ids]))
    return out, hists, labels


# ---------------------------------------------------------------- commands


def cmd_synthesize(args):
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    scheme = _scheme_setting(args, config, key="classes")
    n_plots = int(_setting(args, config, "plots", 70))
    timepoints = int(_setting(args, config, "timepoints", 8))
    width = int(_setting(args, config, "width", 60))
    height = int(_setting(args, config, "height", 200))
    noise_sd = float(_setting(args, config, "noise-sd", 1.5))
    out_dir = Path(args.out)

    gen_config = synthgen.GeneratorConfig(seed=seed, noise_sd=noise_sd)
    try:
        records = synthgen.generate_cohort(
            n_plots, scheme, timepoints, seed, (width, height), out_dir, config=gen_config
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _write_run_config(out_dir, {
        "command": "synthesize", "seed": seed, "scheme": scheme.name,
        "plots": n_plots, "timepoints": timepoints,
        "image_size": [width, height], "noise_sd": noise_sd,
    })
    print(f"wrote {len(records)} plots to {out_dir}")
    return 0


def cmd_ingest(args):
    config = _load_config(args.config)
    manifest = Path(args.manifest)
    if not manifest.is_file():
        raise ConfigError(f"manifest not found: {manifest}")
    try:
        records = datamodel.load_manifest(manifest)
    except datamodel.ManifestError as exc:
        raise ConfigError(str(exc)) from None
    flagged = [r.plot_id for r in records if not r.valid]
    labeled = sum(1 for r in records if r.labeled)
    report = {
        "manifest": str(manifest),
        "records": len(records),
        "labeled": labeled,
        "with_yield": sum(1 for r in records if r.yield_mth is not None),
        "flagged_missing_images": flagged,
    }
    out = Path(_setting(args, config, "out", manifest.parent))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ingest_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{len(records)} records, {labeled} labeled, {len(flagged)} flagged")
    return 0


def cmd_encode(args):
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    scheme = _scheme_setting(args, config)
    mode = _setting(args, config, "subset", "all8")
    if mode not in contour.SUBSET_MODES:
        raise ConfigError(f"unknown subset mode {mode!r}")
    workers = int(_setting(args, config, "workers", 1))
    write_grids = not getattr(args, "no_grids", False)
    records = _load_records(args.manifest)
    manifest_dir = Path(args.manifest).parent
    out_dir = Path(args.out)
    png_dir = out_dir / "contours" / scheme.name / mode
    png_dir.mkdir(parents=True, exist_ok=True)
    grid_dir = out_dir / "grids" / mode
    if write_grids:
        grid_dir.mkdir(parents=True, exist_ok=True)

    lut = contour.load_lut()
    hists = _map_plots(records, lambda rec: _plot_histograms(manifest_dir, rec), workers)

    rows = []
    for pid in sorted(hists):
        for tp, hist in enumerate(hists[pid], start=1):
            rows.append((pid, tp, hist))
    imageproc.write_histograms_csv(out_dir / "histograms.csv", rows)

    for pid, plot_hists in hists.items():
        grid, _ = contour.build_grid(_subset_histograms(mode, plot_hists))
        if grid.max() == 0:
            print(f"warning: {pid} has an all-zero contour grid")
        Image.fromarray(contour.render(grid, lut)).save(png_dir / f"{pid}.png")
        if write_grids:
            contour.write_grid_csv(grid_dir / f"{pid}.csv", grid)

    _write_run_config(out_dir, {
        "command": "encode", "seed": seed, "scheme": scheme.name, "subset": mode,
        "manifest": str(args.manifest), "workers": workers, "grids": write_grids,
    })
    print(f"encoded {len(hists)} plots -> {png_dir}")
    return 0


def cmd_analyze(args):
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    scheme = _scheme_setting(args, config)
    workers = int(_setting(args, config, "workers", 1))
    records = _load_records(args.manifest, require_labels=True)
    manifest_dir = Path(args.manifest).parent
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def exg_series(rec):
        values = []
        for rel in rec.timepoints:
            img = np.asarray(Image.open(manifest_dir / rel).convert("RGB"))
            cropped, _ = imageproc.crop_white_border(img)
            values.append(imageproc.mean_exg(cropped))
        return phenostats.extract_slope(values)

    series = _map_plots(records, exg_series, workers)
    by_id = {r.plot_id: r for r in records}
    phenostats.write_slope_report(out_dir / "slope_report.csv", sorted(series.items()))

    paired = [(by_id[pid], s) for pid, s in series.items() if s.valid]
    stats = phenostats.slope_by_rm_group(paired, scheme)
    phenostats.write_group_report(out_dir / "slope_by_group.csv", scheme.name, stats)

    with_yield = [(rec, s) for rec, s in paired if rec.yield_mth is not None]
    if with_yield:
        reports = phenostats.slope_yield_correlation(with_yield, scheme)
        phenostats.write_correlation_report(out_dir / "correlation_report.csv", scheme.name, reports)
    else:
        print("no yield data; correlation step skipped")

    _write_run_config(out_dir, {
        "command": "analyze", "seed": seed, "scheme": scheme.name,
        "manifest": str(args.manifest), "workers": workers,
    })
    print(f"analyzed {len(series)} plots -> {out_dir}")
    return 0


def cmd_balance(args):
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    scheme = _scheme_setting(args, config)
    mode = _setting(args, config, "subset", "all8")
    k = int(_setting(args, config, "k-neighbors", 5))
    records = _load_records(args.manifest, require_labels=True)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    split = datamodel.split_dataset(records, seed, scheme)
    data, _, _ = _features_by_split(args.encoded, records, scheme, mode, split)
    X_train, y_train = data["train"]
    Xb, yb = smote_balance(X_train, y_train, k_neighbors=k, seed=seed)

    (out_dir / "split.json").write_text(split.to_json() + "\n", encoding="utf-8")
    np.savez_compressed(out_dir / "balanced_features.npz", X=Xb, y=yb)
    before = {int(l): int(c) for l, c in zip(*np.unique(y_train, return_counts=True))}
    after = {int(l): int(c) for l, c in zip(*np.unique(yb, return_counts=True))}
    with open(out_dir / "balance_report.json", "w", encoding="utf-8") as fh:
        json.dump({"before": before, "after": after, "k_neighbors": k}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_run_config(out_dir, {
        "command": "balance", "seed": seed, "scheme": scheme.name, "subset": mode,
        "manifest": str(args.manifest), "encoded": str(args.encoded), "k_neighbors": k,
    })
    print(f"balanced {len(y_train)} -> {len(yb)} training samples")
    return 0


def cmd_train(args):
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    scheme = _scheme_setting(args, config)
    mode = _setting(args, config, "subset", "all8")
    hierarchical = bool(getattr(args, "hierarchical", False) or config.get("hierarchical", False))
    k = int(_setting(args, config, "k-neighbors", 5))
    hyper = _hyper_from(args, config)
    records = _load_records(args.manifest, require_labels=True)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if hierarchical and scheme.name != "seven":
        raise ConfigError("hierarchical training requires the seven-class scheme")

    split = datamodel.split_dataset(records, seed, scheme)
    data, _, _ = _features_by_split(args.encoded, records, scheme, mode, split)
    (out_dir / "split.json").write_text(split.to_json() + "\n", encoding="utf-8")

    hyper_dict = hyper.to_dict()
    hyper_dict.update(scheme=scheme.name, subset=mode, k_neighbors=k, hierarchical=hierarchical)

    if hierarchical:
        model, curves = train_hierarchical(
            data["train"][0], data["train"][1], data["val"][0], data["val"][1],
            hyper, seed=seed, k_neighbors=k,
        )
        for stage, curve in curves.items():
            _write_curve(out_dir / f"training_curve_{stage}.csv", curve)
    else:
        Xb, yb = smote_balance(data["train"][0], data["train"][1], k_neighbors=k, seed=seed)
        model, curve = train(Xb, yb, data["val"][0], data["val"][1], scheme.n_classes, hyper, seed=seed)
        _write_curve(out_dir / "training_curve.csv", curve)

    save_checkpoint(out_dir / "checkpoint.ckpt", model, seed, hyper_dict)
    _write_run_config(out_dir, {
        "command": "train", "seed": seed, "scheme": scheme.name, "subset": mode,
        "manifest": str(args.manifest), "encoded": str(args.encoded),
        "hierarchical": hierarchical, "hyperparams": hyper_dict,
    })
    print(f"checkpoint -> {out_dir / 'checkpoint.ckpt'}")
    return 0


def _write_curve(path, curve):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_acc\n")
        for epoch, loss, acc in curve:
            fh.write(f"{epoch},{loss:.6f},{acc:.6f}\n")


def cmd_evaluate(args):
    config = _load_config(args.config)
    ckpt_path = Path(args.checkpoint)
    if not ckpt_path.is_file():
        raise ConfigError(f"checkpoint not found: {ckpt_path}")
    model, header = load_checkpoint(ckpt_path)
    hp = header["hyperparams"]
    scheme = _scheme_setting(args, {"scheme": hp["scheme"]})
    mode = hp["subset"]

    split_path = Path(_setting(args, config, "split", Path(args.out) / "split.json"))
    if not split_path.is_file():
        raise ConfigError(f"split file not found: {split_path}")
    split = datamodel.DatasetSplit.from_json(split_path.read_text(encoding="utf-8"))

    records = _load_records(args.manifest, require_labels=True)
    data, _, _ = _features_by_split(args.encoded, records, scheme, mode, split)
    X_test, y_test = data["test"]
    report = evaluate(model, X_test, y_test, scheme.n_classes)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_eval_report(out_dir / "eval_report.json", out_dir / "confusion.csv", report)
    _write_run_config(out_dir, {
        "command": "evaluate", "seed": header["seed"], "scheme": scheme.name,
        "subset": mode, "checkpoint": str(ckpt_path),
        "manifest": str(args.manifest), "encoded": str(args.encoded),
    })
    print(f"accuracy {report.accuracy:.4f}, adjacent {report.adjacent_accuracy:.4f}, "
          f"top2 {report.top2_prob_accuracy:.4f}")
    return 0


def cmd_subset_study(args):
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    scheme = _scheme_setting(args, config)
    modes_arg = _setting(args, config, "modes", "all")
    if modes_arg == "all":
        modes = list(contour.SUBSET_MODES)
    else:
        modes = [m.strip() for m in modes_arg.split(",") if m.strip()]
        unknown = [m for m in modes if m not in contour.SUBSET_MODES]
        if unknown:
            raise ConfigError(f"unknown subset mode(s): {', '.join(unknown)}")
    k = int(_setting(args, config, "k-neighbors", 5))
    hyper = _hyper_from(args, config)
    records = _load_records(args.manifest, require_labels=True)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    hists = imageproc.read_histograms_csv(Path(args.encoded) / "histograms.csv")
    series_len = len(next(iter(hists.values())))
    if series_len != 8 and any(m != "all8" for m in modes):
        raise ConfigError(f"reduced subset modes need 8 timepoints, cohort has {series_len}")
    labels = {r.plot_id: datamodel.assign_label(r.rm_rating, scheme) for r in records}
    split = datamodel.split_dataset(records, seed, scheme)
    rows = subset_study(hists, labels, split, modes, scheme.n_classes, hyper, seed=seed, k_neighbors=k)
    write_subset_study(out_dir / "subset_study.csv", rows)
    (out_dir / "split.json").write_text(split.to_json() + "\n", encoding="utf-8")
    _write_run_config(out_dir, {
        "command": "subset-study", "seed": seed, "scheme": scheme.name,
        "modes": modes, "manifest": str(args.manifest), "encoded": str(args.encoded),
        "hyperparams": hyper.to_dict(),
    })
    for mode, train_acc, test_acc in rows:
        print(f"{mode}: train {train_acc:.4f} test {test_acc:.4f}")
    return 0


def cmd_report(args):
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise ConfigError(f"run directory not found: {run_dir}")
    lines = ["# Run report", ""]
    rc = run_dir / "run_config.json"
    if rc.is_file():
        lines += ["## Configuration", "```json", rc.read_text(encoding="utf-8").strip(), "```", ""]
    for name, title in (
        ("ingest_report.json", "Ingest"),
        ("balance_report.json", "Class balance"),
        ("eval_report.json", "Evaluation"),
    ):
        path = run_dir / name
        if path.is_file():
            lines += [f"## {title}", "```json", path.read_text(encoding="utf-8").strip(), "```", ""]
    for name, title in (
        ("slope_by_group.csv", "Slope by maturity group"),
        ("correlation_report.csv", "Slope-yield correlation"),
        ("subset_study.csv", "Timepoint subset study"),
        ("training_curve.csv", "Training curve (last 5 epochs)"),
    ):
        path = run_dir / name
        if path.is_file():
            text = path.read_text(encoding="utf-8").strip().splitlines()
            if name.startswith("training_curve"):
                text = text[:1] + text[-5:]
            lines += [f"## {title}", "```", *text, "```", ""]
    out = run_dir / "run_report.md"
    out.write_text("\n".join(lines), encoding="utf-8")
    print(f"report -> {out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="soypheno",
        description="Maturity phenotyping pipeline over plot image time series",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **flags):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, help="master seed (overrides PHENO_SEED and config)")
        for flag, kwargs in flags.items():
            p.add_argument(flag, **kwargs)
        p.set_defaults(func=func)
        return p

    add("synthesize", cmd_synthesize,
        **{"--out": dict(required=True, help="output directory"),
           "--plots": dict(type=int), "--classes": dict(), "--timepoints": dict(type=int),
           "--width": dict(type=int), "--height": dict(type=int),
           "--noise-sd": dict(type=float)})
    add("ingest", cmd_ingest,
        **{"--manifest": dict(required=True), "--out": dict()})
    add("encode", cmd_encode,
        **{"--manifest": dict(required=True), "--out": dict(required=True),
           "--scheme": dict(), "--subset": dict(), "--workers": dict(type=int),
           "--no-grids": dict(action="store_true", help="skip per-plot grid CSVs")})
    add("analyze", cmd_analyze,
        **{"--manifest": dict(required=True), "--out": dict(required=True),
           "--scheme": dict(), "--workers": dict(type=int)})
    add("balance", cmd_balance,
        **{"--manifest": dict(required=True), "--encoded": dict(required=True),
           "--out": dict(required=True), "--scheme": dict(), "--subset": dict(),
           "--k-neighbors": dict(type=int)})
    add("train", cmd_train,
        **{"--manifest": dict(required=True), "--encoded": dict(required=True),
           "--out": dict(required=True), "--scheme": dict(), "--subset": dict(),
           "--epochs": dict(type=int), "--lr": dict(type=float), "--batch": dict(type=int),
           "--hidden-units": dict(type=int), "--input-gain": dict(type=float),
           "--k-neighbors": dict(type=int),
           "--hierarchical": dict(action="store_true")})
    add("evaluate", cmd_evaluate,
        **{"--checkpoint": dict(required=True), "--manifest": dict(required=True),
           "--encoded": dict(required=True), "--out": dict(required=True),
           "--split": dict(help="split.json path (default: <out>/split.json)")})
    add("subset-study", cmd_subset_study,
        **{"--manifest": dict(required=True), "--encoded": dict(required=True),
           "--out": dict(required=True), "--scheme": dict(),
           "--modes": dict(help="comma-separated modes or 'all'"),
           "--epochs": dict(type=int), "--lr": dict(type=float), "--batch": dict(type=int),
           "--hidden-units": dict(type=int), "--input-gain": dict(type=float),
           "--k-neighbors": dict(type=int)})
    add("report", cmd_report, **{"--run": dict(required=True, help="run directory")})
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except datamodel.ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - map any runtime failure to exit 1
        print(f"failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
