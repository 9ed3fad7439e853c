"""Class balancing, augmentation, the contour classifier, and metrics."""

from .augment import AugmentParams, augment
from .checkpoint import load_checkpoint, save_checkpoint
from .evaluate import EvalReport, evaluate, report_from_predictions, write_eval_report
from .features import FEATURE_SHAPE, FeatureVector, feature_matrix, grid_to_features
from .network import ContourNet, TrainingDiverged, cross_entropy, gradient_check, softmax
from .smote import SmoteInfo, smote_balance
from .study import features_for_mode, subset_study, write_subset_study
from .train import (
    SUPER_GROUPS,
    HierarchicalModel,
    Hyperparams,
    group_of_label,
    train,
    train_hierarchical,
)

__all__ = [
    "AugmentParams",
    "augment",
    "load_checkpoint",
    "save_checkpoint",
    "EvalReport",
    "evaluate",
    "report_from_predictions",
    "write_eval_report",
    "FEATURE_SHAPE",
    "FeatureVector",
    "feature_matrix",
    "grid_to_features",
    "ContourNet",
    "TrainingDiverged",
    "cross_entropy",
    "gradient_check",
    "softmax",
    "SmoteInfo",
    "smote_balance",
    "features_for_mode",
    "subset_study",
    "write_subset_study",
    "SUPER_GROUPS",
    "HierarchicalModel",
    "Hyperparams",
    "group_of_label",
    "train",
    "train_hierarchical",
]
