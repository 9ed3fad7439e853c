"""Greenness-loss slope extraction and slope/yield statistics.

The slope of a plot's mean-ExG series is fit between its maximum and the
subsequent minimum; group summaries and yield correlations follow the
plot's maturity class under the active scheme.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .datamodel import assign_label


@dataclass(frozen=True)
class ExGSeries:
    """Mean-ExG series with its fitted decline window and slope."""

    values: tuple
    tp_max: int
    tp_min: int
    slope: float
    intercept: float
    valid: bool

    def __post_init__(self):
        if self.tp_max > self.tp_min:
            raise ValueError("tp_max must not exceed tp_min")


@dataclass(frozen=True)
class CorrelationReport:
    """Pearson correlation of slope vs yield within one maturity group."""

    rm_group: int
    n: int
    r: float | None
    p_value: float | None

    def __post_init__(self):
        if self.r is not None and not -1.0 <= self.r <= 1.0 + 1e-12:
            raise ValueError(f"correlation out of range: {self.r}")


def extract_slope(series):
    """Fit the greenness-loss slope of a mean-ExG series.

    tp_max is the argmax over all indices (first on ties); tp_min the
    argmin over indices at or after tp_max (first on ties). The slope is
    the ordinary least-squares fit of value on index over the inclusive
    window. Windows shorter than 2 points mark the series invalid instead
    of raising.
    """
    values = np.asarray(series, dtype=np.float64)
    if values.ndim != 1 or values.size < 3:
        raise ValueError("need a 1-D series of at least 3 values")
    tp_max = int(np.argmax(values))
    tp_min = tp_max + int(np.argmin(values[tp_max:]))
    window = values[tp_max:tp_min + 1]
    if window.size < 2:
        return ExGSeries(
            values=tuple(values), tp_max=tp_max, tp_min=tp_min,
            slope=math.nan, intercept=math.nan, valid=False,
        )
    x = np.arange(tp_max, tp_min + 1, dtype=np.float64)
    slope, intercept = np.polyfit(x, window, 1)
    return ExGSeries(
        values=tuple(values), tp_max=tp_max, tp_min=tp_min,
        slope=float(slope), intercept=float(intercept), valid=True,
    )


def slope_by_rm_group(plots, scheme):
    """Per-group (mean slope, sd, n) over plots with valid slopes.

    `plots` is an iterable of (record, ExGSeries). The sd is the
    population standard deviation, so singleton groups report 0. Groups
    with no members are omitted.
    """
    groups = {}
    for rec, series in plots:
        if not series.valid:
            raise ValueError(f"plot {rec.plot_id} has no valid slope")
        label = assign_label(rec.rm_rating, scheme)
        groups.setdefault(label, []).append(series.slope)
    return {
        label: (float(np.mean(vals)), float(np.std(vals)), len(vals))
        for label, vals in sorted(groups.items())
    }


def _three_sd_mask(values):
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return np.ones(values.size, dtype=bool)
    sd = values.std(ddof=1)
    return np.abs(values - values.mean()) <= 3.0 * sd


def pearson_with_p(x, y):
    """Pearson r plus a two-sided t-test p-value with n-2 dof."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    r = float(np.corrcoef(x, y)[0, 1])
    if math.isnan(r):
        return math.nan, math.nan
    if abs(r) >= 1.0:
        return max(-1.0, min(1.0, r)), 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(stats.t.sf(abs(t), n - 2))
    return r, p


def slope_yield_correlation(plots, scheme):
    """Slope-vs-yield Pearson correlation per maturity group.

    Within each group, plots whose yield or slope lies more than three
    standard deviations from the group mean are dropped in a single pass
    (group statistics computed once, before any removal). Groups left with
    fewer than 3 plots report r as undefined.
    """
    groups = {}
    for rec, series in plots:
        if rec.yield_mth is None or not series.valid:
            continue
        label = assign_label(rec.rm_rating, scheme)
        groups.setdefault(label, []).append((series.slope, rec.yield_mth))

    reports = []
    for label in sorted(groups):
        slopes = np.array([s for s, _ in groups[label]])
        yields = np.array([y for _, y in groups[label]])
        keep = _three_sd_mask(slopes) & _three_sd_mask(yields)
        slopes, yields = slopes[keep], yields[keep]
        n = int(keep.sum())
        if n < 3:
            reports.append(CorrelationReport(rm_group=label, n=n, r=None, p_value=None))
            continue
        r, p = pearson_with_p(slopes, yields)
        if math.isnan(r):
            reports.append(CorrelationReport(rm_group=label, n=n, r=None, p_value=None))
        else:
            reports.append(CorrelationReport(rm_group=label, n=n, r=r, p_value=p))
    return reports


def write_slope_report(path, rows):
    """rows: iterable of (plot_id, ExGSeries)."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["plot_id", "tp_max", "tp_min", "slope", "valid"])
        for plot_id, series in rows:
            writer.writerow([
                plot_id, series.tp_max, series.tp_min,
                "" if not series.valid else f"{series.slope:.6f}",
                int(series.valid),
            ])


def write_correlation_report(path, scheme_name, reports):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scheme", "group", "n", "r", "p"])
        for rep in reports:
            writer.writerow([
                scheme_name, rep.rm_group, rep.n,
                "" if rep.r is None else f"{rep.r:.6f}",
                "" if rep.p_value is None else f"{rep.p_value:.6g}",
            ])


def write_group_report(path, scheme_name, group_stats):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scheme", "group", "mean_slope", "sd", "n"])
        for label, (mean, sd, n) in group_stats.items():
            writer.writerow([scheme_name, label, f"{mean:.6f}", f"{sd:.6f}", n])
