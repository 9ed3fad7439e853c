"""Training loops: flat softmax classifier and the two-tier hierarchy.

Plain mini-batch gradient descent with a fixed learning rate; the
checkpoint returned is the one with the best validation accuracy.
Labels at this API are 1-based class labels; networks run 0-based
internally.
"""

import math
from dataclasses import dataclass

import numpy as np

from .augment import augment
from .network import ContourNet, TrainingDiverged
from .smote import smote_balance

# Seven-class super-groups for the two-tier classifier.
SUPER_GROUPS = ((1,), (2, 3), (4, 5), (6, 7))


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 50
    conv_channels: tuple = (8, 16)
    hidden_units: int = 64
    input_gain: float = 32.0
    augment_params: object = None  # AugmentParams or None

    def to_dict(self):
        d = {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "conv_channels": list(self.conv_channels),
            "hidden_units": self.hidden_units,
            "input_gain": self.input_gain,
        }
        if self.augment_params is not None:
            d["augment"] = vars(self.augment_params)
        return d


def accuracy_score(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    return float((pred == truth).mean()) if pred.size else 0.0


def train(X_train, y_train, X_val, y_val, n_classes, hyper=None, seed=0,
          input_shape=(32, 64)):
    """Train a ContourNet; returns (model, curve).

    curve rows are (epoch, mean_train_loss, val_accuracy). The model
    carries the parameters of the epoch with the best validation accuracy
    (earliest on ties). Raises TrainingDiverged if the loss goes
    non-finite.
    """
    hyper = hyper or Hyperparams()
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    if y_train.min() < 1 or y_train.max() > n_classes:
        raise ValueError("labels must lie in 1..n_classes")

    net = ContourNet(
        n_classes, input_shape=input_shape, conv_channels=hyper.conv_channels,
        hidden_units=hyper.hidden_units, seed=seed, input_gain=hyper.input_gain,
    )
    rng = np.random.default_rng([seed, 0x5EED])
    n = len(X_train)
    curve = []
    best_acc, best_params, best_epoch = -1.0, net.copy_params(), 0

    for epoch in range(1, hyper.epochs + 1):
        perm = rng.permutation(n)
        loss_total = 0.0
        for start in range(0, n, hyper.batch_size):
            take = perm[start:start + hyper.batch_size]
            Xb = X_train[take]
            if hyper.augment_params is not None:
                h, w = input_shape
                Xb = np.stack([
                    augment(x.reshape(h, w), hyper.augment_params, [seed, epoch, int(i)]).reshape(-1)
                    for i, x in zip(take, Xb)
                ])
            loss_sum, _, grads = net.loss_and_grads(Xb, y_train[take] - 1)
            if not math.isfinite(loss_sum):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} (lr={hyper.learning_rate})"
                )
            net.apply_gradients(grads, hyper.learning_rate)
            loss_total += loss_sum
        val_acc = accuracy_score(net.predict(X_val) + 1, y_val)
        curve.append((epoch, loss_total / n, val_acc))
        if val_acc > best_acc:
            best_acc, best_params, best_epoch = val_acc, net.copy_params(), epoch

    net.set_params(best_params)
    net.best_epoch = best_epoch
    net.best_val_accuracy = best_acc
    return net, curve


def group_of_label(label):
    for gi, members in enumerate(SUPER_GROUPS, start=1):
        if label in members:
            return gi
    raise ValueError(f"label {label} outside the seven-class range")


class HierarchicalModel:
    """Stage-1 super-group classifier refined by within-group binaries."""

    def __init__(self, stage1, stage2):
        self.stage1 = stage1
        self.stage2 = stage2  # {group_index: ContourNet} for 2-member groups

    def predict(self, X):
        """1-based seven-class labels via group routing."""
        X = np.asarray(X, dtype=np.float64)
        groups = self.stage1.predict(X) + 1
        out = np.empty(len(X), dtype=np.int64)
        for gi, members in enumerate(SUPER_GROUPS, start=1):
            rows = np.flatnonzero(groups == gi)
            if rows.size == 0:
                continue
            if len(members) == 1:
                out[rows] = members[0]
            else:
                pick = self.stage2[gi].predict(X[rows])
                out[rows] = np.asarray(members)[pick]
        return out

    def predict_labels(self, X):
        return self.predict(X)

    def predict_proba(self, X):
        """Composite distribution p(group) * p(member | group)."""
        X = np.asarray(X, dtype=np.float64)
        pg = self.stage1.predict_proba(X)
        probs = np.zeros((len(X), 7))
        for gi, members in enumerate(SUPER_GROUPS, start=1):
            if len(members) == 1:
                probs[:, members[0] - 1] = pg[:, gi - 1]
            else:
                pm = self.stage2[gi].predict_proba(X)
                for mi, member in enumerate(members):
                    probs[:, member - 1] = pg[:, gi - 1] * pm[:, mi]
        return probs


def train_hierarchical(X_train, y_train, X_val, y_val, hyper=None, seed=0,
                       input_shape=(32, 64), k_neighbors=5, balance=True):
    """Two-tier training over seven-class labels; returns (model, curves).

    Stage 1 learns the four super-groups; stage 2 learns the member split
    inside each two-member group. Each stage's training set is SMOTE
    balanced on its own label space when `balance` is set. Raises if any
    super-group is missing from the training labels.
    """
    hyper = hyper or Hyperparams()
    y_train = np.asarray(y_train, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)
    for gi, members in enumerate(SUPER_GROUPS, start=1):
        if not np.isin(y_train, members).any():
            raise ValueError(f"training data has no members of super-group {members}")

    def balanced(X, y):
        if balance and len(np.unique(y)) > 1:
            return smote_balance(X, y, k_neighbors=k_neighbors, seed=seed)
        return X, y

    g_train = np.array([group_of_label(l) for l in y_train])
    g_val = np.array([group_of_label(l) for l in y_val])
    Xb, gb = balanced(X_train, g_train)
    stage1, curve1 = train(Xb, gb, X_val, g_val, 4, hyper, seed=seed, input_shape=input_shape)

    curves = {"stage1": curve1}
    stage2 = {}
    for gi, members in enumerate(SUPER_GROUPS, start=1):
        if len(members) == 1:
            continue
        tr = np.isin(y_train, members)
        va = np.isin(y_val, members)
        yb = np.where(y_train[tr] == members[0], 1, 2)
        yv = np.where(y_val[va] == members[0], 1, 2)
        Xs, ys = balanced(X_train[tr], yb)
        X_val_s = X_val[va] if va.any() else X_train[tr][:1]
        y_val_s = yv if va.any() else ys[:1]
        net, curve = train(Xs, ys, X_val_s, y_val_s, 2, hyper,
                           seed=seed + gi, input_shape=input_shape)
        stage2[gi] = net
        curves[f"stage2_group{gi}"] = curve
    return HierarchicalModel(stage1, stage2), curves
