"""soypheno: plot-level maturity phenotyping from RGB time-series imagery.

Turns per-plot image series into hue contour phenotypes, greenness-loss
slope statistics, and maturity-class predictions, with a synthetic cohort
generator for ground-truthed end-to-end runs.
"""

__version__ = "0.1.0"
