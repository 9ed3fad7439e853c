"""Core domain types, manifest ingestion, label schemes, dataset splitting.

Maturity ratings carry one fractional digit, so all bin comparisons are done
on integer tenths (1.9 -> 19) to keep bin edges exact.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RM_MIN_TENTHS = 16
RM_MAX_TENTHS = 39

GENERATIONS = ("F5", "F6", "F7")

MANIFEST_FIXED_COLUMNS = ("plot_id", "year", "field_id", "generation", "rm_rating", "yield_mth")


class ManifestError(ValueError):
    """Malformed manifest content; message carries row/column context."""


@dataclass(frozen=True)
class PlotRecord:
    """One trial plot: identity, metadata, rating, yield, timepoint images."""

    plot_id: str
    year: int
    field_id: str
    generation: str
    rm_rating: float | None
    yield_mth: float | None
    timepoints: tuple
    missing_timepoints: tuple = ()

    def __post_init__(self):
        if self.generation not in GENERATIONS:
            raise ValueError(f"unknown generation {self.generation!r}")
        if self.rm_rating is not None:
            tenths = rating_tenths(self.rm_rating)
            if not RM_MIN_TENTHS <= tenths <= RM_MAX_TENTHS:
                raise ValueError(
                    f"rm_rating {self.rm_rating} outside [{RM_MIN_TENTHS / 10}, {RM_MAX_TENTHS / 10}]"
                )
        if self.yield_mth is not None and self.yield_mth < 0:
            raise ValueError("yield_mth must be non-negative")
        if len(set(self.timepoints)) != len(self.timepoints):
            raise ValueError(f"duplicate timepoint references in plot {self.plot_id}")

    @property
    def valid(self):
        """False when any referenced timepoint image was missing on disk."""
        return not self.missing_timepoints

    @property
    def labeled(self):
        return self.rm_rating is not None


def rating_tenths(rating):
    """Rating as integer tenths; rejects more than one fractional digit."""
    tenths = round(float(rating) * 10)
    if abs(float(rating) * 10 - tenths) > 1e-6:
        raise ValueError(f"rating {rating} has more than one fractional digit")
    return int(tenths)


@dataclass(frozen=True)
class ClassScheme:
    """Named mapping from rating ranges (integer tenths) to class labels."""

    name: str
    bins: tuple  # of (low_tenths, high_tenths, label), ordered

    def __post_init__(self):
        labels = [b[2] for b in self.bins]
        if min(labels) != 1 or sorted(set(labels)) != list(range(1, max(labels) + 1)):
            raise ValueError("labels must be contiguous ascending from 1")
        if labels != sorted(labels):
            raise ValueError("labels must be non-decreasing across bins")
        edge = RM_MIN_TENTHS
        for low, high, _ in self.bins:
            if low != edge or high < low:
                raise ValueError("bins must partition the rating range without gaps")
            edge = high + 1
        if edge != RM_MAX_TENTHS + 1:
            raise ValueError("bins must cover the full rating range")

    @property
    def n_classes(self):
        return max(b[2] for b in self.bins)

    def label_for(self, rating):
        tenths = rating_tenths(rating)
        for low, high, label in self.bins:
            if low <= tenths <= high:
                return label
        raise ValueError(f"rating {rating} outside all bins of scheme {self.name}")


def _scheme(name, row_labels):
    edges = ((16, 20), (21, 23), (24, 26), (27, 29), (30, 32), (33, 35), (36, 37), (38, 39))
    return ClassScheme(name, tuple((lo, hi, lab) for (lo, hi), lab in zip(edges, row_labels)))


SCHEMES = {
    "seven": _scheme("seven", (1, 2, 3, 4, 5, 6, 6, 7)),
    "five": _scheme("five", (1, 2, 2, 3, 4, 4, 4, 5)),
    "four-first": _scheme("four-first", (1, 2, 2, 3, 4, 4, 4, 4)),
    "four-second": _scheme("four-second", (1, 2, 2, 3, 3, 4, 4, 4)),
}


def get_scheme(name):
    try:
        return SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}") from None


def assign_label(rm_rating, scheme):
    """Class label of a rating under a scheme (unique containing bin)."""
    return scheme.label_for(rm_rating)


def load_manifest(path):
    """Read a manifest CSV into PlotRecords.

    Records whose timepoint images are missing on disk are returned with
    those paths recorded in missing_timepoints (flagged, not dropped).
    Raises ManifestError on malformed rows or duplicate plot ids.
    """
    path = Path(path)
    base = path.parent
    records = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest") from None
        if tuple(header[:6]) != MANIFEST_FIXED_COLUMNS:
            raise ManifestError(f"{path}: header must start with {','.join(MANIFEST_FIXED_COLUMNS)}")
        tp_cols = header[6:]
        if not tp_cols or tp_cols != [f"tp{i}" for i in range(1, len(tp_cols) + 1)]:
            raise ManifestError(f"{path}: timepoint columns must be tp1..tpN")

        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ManifestError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            vals = dict(zip(header, row))
            plot_id = vals["plot_id"]
            if plot_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate plot_id {plot_id!r}")
            seen.add(plot_id)

            def parse(col, conv, optional=False, row=vals, n=lineno):
                raw = row[col].strip()
                if raw == "":
                    if optional:
                        return None
                    raise ManifestError(f"{path}:{n}: column {col!r} is empty")
                try:
                    return conv(raw)
                except ValueError:
                    raise ManifestError(f"{path}:{n}: column {col!r} has bad value {raw!r}") from None

            rel_paths = [vals[c] for c in tp_cols]
            missing = tuple(p for p in rel_paths if not (base / p).is_file())
            try:
                rec = PlotRecord(
                    plot_id=plot_id,
                    year=parse("year", int),
                    field_id=vals["field_id"],
                    generation=vals["generation"],
                    rm_rating=parse("rm_rating", float, optional=True),
                    yield_mth=parse("yield_mth", float, optional=True),
                    timepoints=tuple(rel_paths),
                    missing_timepoints=missing,
                )
            except ValueError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
            records.append(rec)
    return records


def write_manifest(path, records):
    """Write records back out in the canonical manifest CSV layout."""
    path = Path(path)
    n_tp = len(records[0].timepoints) if records else 0
    header = list(MANIFEST_FIXED_COLUMNS) + [f"tp{i}" for i in range(1, n_tp + 1)]
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in records:
            writer.writerow(
                [
                    rec.plot_id,
                    rec.year,
                    rec.field_id,
                    rec.generation,
                    "" if rec.rm_rating is None else f"{rec.rm_rating:.1f}",
                    "" if rec.yield_mth is None else f"{rec.yield_mth:.4f}",
                ]
                + list(rec.timepoints)
            )


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train/val/test plot-id sets plus the seed that made them."""

    train_ids: tuple
    val_ids: tuple
    test_ids: tuple
    seed: int

    def __post_init__(self):
        sets = [set(self.train_ids), set(self.val_ids), set(self.test_ids)]
        total = sum(len(s) for s in sets)
        if len(sets[0] | sets[1] | sets[2]) != total:
            raise ValueError("split sets overlap")

    def to_json(self):
        return json.dumps(
            {
                "seed": self.seed,
                "train": sorted(self.train_ids),
                "val": sorted(self.val_ids),
                "test": sorted(self.test_ids),
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(
            train_ids=tuple(obj["train"]),
            val_ids=tuple(obj["val"]),
            test_ids=tuple(obj["test"]),
            seed=int(obj["seed"]),
        )


# Split fractions in tenths: 8/1/1 of every ten plots.
SPLIT_TENTHS = (8, 1, 1)


def _global_targets(n):
    sizes = [(f * n) // 10 for f in SPLIT_TENTHS]
    remainders = [(f * n) % 10 for f in SPLIT_TENTHS]
    for _ in range(n - sum(sizes)):
        i = max(range(3), key=lambda j: (remainders[j], -j))
        sizes[i] += 1
        remainders[i] = -1
    return sizes


def split_dataset(records, seed, scheme):
    """Deterministic stratified 80/10/10 split of labeled records.

    Per class, val and test take floor(0.1 * n_c) members each; remaining
    global val/test deficits are filled from the classes with the largest
    fractional remainders, so overall sizes land within one plot of the
    80/10/10 targets while every class with >= 10 members reaches all
    three sets.
    """
    labeled = [r for r in records if r.labeled]
    if len(labeled) < 10:
        raise ValueError(f"need at least 10 labeled records, got {len(labeled)}")
    if len(labeled) != len(records):
        raise ValueError("split_dataset requires all records to be labeled")

    by_class = {}
    for rec in labeled:
        by_class.setdefault(assign_label(rec.rm_rating, scheme), []).append(rec.plot_id)

    rng = np.random.default_rng([seed, 0x5B17])
    order = {}
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        order[label] = [ids[i] for i in rng.permutation(len(ids))]

    n = len(labeled)
    _, target_val, target_test = _global_targets(n)

    alloc = {label: [len(ids) // 10, len(ids) // 10] for label, ids in order.items()}

    for part, target in ((0, target_val), (1, target_test)):
        deficit = target - sum(a[part] for a in alloc.values())
        # Classes keyed by largest fractional remainder; cycle if needed.
        ranked = sorted(
            alloc,
            key=lambda lab: (-(len(order[lab]) % 10), -len(order[lab]), lab),
        )
        while deficit > 0:
            moved = False
            for lab in ranked:
                if deficit == 0:
                    break
                taken = alloc[lab][0] + alloc[lab][1]
                if len(order[lab]) - taken > 1:  # keep at least one train member
                    alloc[lab][part] += 1
                    deficit -= 1
                    moved = True
            if not moved:
                raise ValueError("cannot satisfy split proportions; classes too small")

    train, val, test = [], [], []
    for label in sorted(order):
        ids = order[label]
        n_val, n_test = alloc[label]
        val.extend(ids[:n_val])
        test.extend(ids[n_val:n_val + n_test])
        train.extend(ids[n_val + n_test:])

    return DatasetSplit(
        train_ids=tuple(sorted(train)),
        val_ids=tuple(sorted(val)),
        test_ids=tuple(sorted(test)),
        seed=seed,
    )
