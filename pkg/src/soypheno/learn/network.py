"""Small convolutional classifier implemented directly on numpy.

Architecture: two 3x3 convolution + ReLU + 2x2 max-pool stages, one hidden
dense layer, softmax output. The batch objective is the summed cross
entropy; analytic gradients are exact and checkable against central finite
differences. All randomness comes from the construction seed.
"""

import math

import numpy as np

PARAM_ORDER = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during optimization."""


def im2col(x, k=3, pad=1):
    """(N, C, H, W) -> (N, C*k*k, H*W) patch matrix, stride 1."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((n, c, k * k, h * w), dtype=x.dtype)
    for di in range(k):
        for dj in range(k):
            cols[:, :, di * k + dj, :] = xp[:, :, di:di + h, dj:dj + w].reshape(n, c, h * w)
    return cols.reshape(n, c * k * k, h * w)


def col2im(cols, x_shape, k=3, pad=1):
    """Scatter-add inverse of im2col."""
    n, c, h, w = x_shape
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols = cols.reshape(n, c, k * k, h * w)
    for di in range(k):
        for dj in range(k):
            xp[:, :, di:di + h, dj:dj + w] += cols[:, :, di * k + dj, :].reshape(n, c, h, w)
    return xp[:, :, pad:pad + h, pad:pad + w]


def _conv_forward(x, w, b):
    n, _, h, wd = x.shape
    f = w.shape[0]
    cols = im2col(x)                                   # (N, C*9, L)
    out = np.matmul(w.reshape(f, -1), cols) + b[:, None]
    return out.reshape(n, f, h, wd), cols


def _conv_backward(dout, cols, x_shape, w, need_dx=True):
    n, c, h, wd = x_shape
    f = w.shape[0]
    dflat = dout.reshape(n, f, h * wd)
    dw = np.einsum("nfl,nkl->fk", dflat, cols, optimize=True).reshape(w.shape)
    db = dflat.sum(axis=(0, 2))
    if not need_dx:
        return None, dw, db
    # Input gradient of a stride-1 same-pad conv is the conv of the output
    # gradient with the spatially flipped, channel-swapped kernels.
    w_t = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    dx, _ = _conv_forward(dout, w_t, np.zeros(c, dtype=w.dtype))
    return dx, dw, db


def _pool_windows(x):
    # The four corners of each 2x2 window, as strided views.
    return (x[:, :, 0::2, 0::2], x[:, :, 0::2, 1::2],
            x[:, :, 1::2, 0::2], x[:, :, 1::2, 1::2])


def _pool_forward(x):
    a, b, c, d = _pool_windows(x)
    out = np.maximum(np.maximum(a, b), np.maximum(c, d))
    return out, x


def _pool_backward(dout, x, x_shape):
    # Route each window's gradient to its first maximal element, matching
    # argmax-over-window semantics on ties.
    out = np.maximum.reduce([w for w in _pool_windows(x)])
    dx = np.zeros(x_shape, dtype=dout.dtype)
    remaining = np.ones_like(dout, dtype=bool)
    for win, dwin in zip(_pool_windows(x), _pool_windows(dx)):
        hit = (win == out) & remaining
        dwin += dout * hit
        remaining &= ~hit
    return dx


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, class_idx):
    """Per-sample -log p(true); class_idx is 0-based."""
    p = probs[np.arange(len(class_idx)), class_idx]
    tiny = np.finfo(p.dtype).tiny if np.issubdtype(p.dtype, np.floating) else np.finfo(np.float64).tiny
    with np.errstate(invalid="ignore"):
        return -np.log(np.maximum(p, tiny))


class ContourNet:
    """Conv-pool x2 + hidden dense + softmax over flattened contour grids."""

    def __init__(self, n_classes, input_shape=(32, 64), conv_channels=(8, 16),
                 hidden_units=64, seed=0, dtype=np.float32, input_gain=32.0):
        h, w = input_shape
        if h % 4 or w % 4:
            raise ValueError("input sides must be divisible by 4 (two 2x2 pools)")
        self.n_classes = int(n_classes)
        self.input_shape = (int(h), int(w))
        self.conv_channels = (int(conv_channels[0]), int(conv_channels[1]))
        self.hidden_units = int(hidden_units)
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        # Fixed input scaling; [0, 1] features are sparse enough that unit
        # scale leaves hidden activations too small for a fixed-rate descent.
        self.input_gain = float(input_gain)

        c1, c2 = self.conv_channels
        flat = c2 * (h // 4) * (w // 4)
        rng = np.random.default_rng([seed, 0xC0DE])

        def he(shape, fan_in):
            return (rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)).astype(self.dtype)

        # Final layer starts at zero so an untrained net predicts uniformly.
        self.params = {
            "conv1_w": he((c1, 1, 3, 3), 9),
            "conv1_b": np.zeros(c1, dtype=self.dtype),
            "conv2_w": he((c2, c1, 3, 3), c1 * 9),
            "conv2_b": np.zeros(c2, dtype=self.dtype),
            "fc1_w": he((flat, self.hidden_units), flat),
            "fc1_b": np.zeros(self.hidden_units, dtype=self.dtype),
            "fc2_w": np.zeros((self.hidden_units, self.n_classes), dtype=self.dtype),
            "fc2_b": np.zeros(self.n_classes, dtype=self.dtype),
        }

    def architecture(self):
        return {
            "n_classes": self.n_classes,
            "input_shape": list(self.input_shape),
            "conv_channels": list(self.conv_channels),
            "hidden_units": self.hidden_units,
            "seed": self.seed,
            "dtype": self.dtype.name,
            "input_gain": self.input_gain,
        }

    def _as_batch(self, X):
        X = np.asarray(X, dtype=self.dtype) * self.dtype.type(self.input_gain)
        h, w = self.input_shape
        if X.ndim == 1:
            X = X[None, :]
        return X.reshape(X.shape[0], 1, h, w)

    def _forward(self, x):
        p = self.params
        cache = {}
        z1, cache["cols1"] = _conv_forward(x, p["conv1_w"], p["conv1_b"])
        a1 = np.maximum(z1, 0)
        p1, cache["pool1_in"] = _pool_forward(a1)
        z2, cache["cols2"] = _conv_forward(p1, p["conv2_w"], p["conv2_b"])
        a2 = np.maximum(z2, 0)
        p2, cache["pool2_in"] = _pool_forward(a2)
        flat = p2.reshape(x.shape[0], -1)
        h1 = flat @ p["fc1_w"] + p["fc1_b"]
        a3 = np.maximum(h1, 0)
        logits = a3 @ p["fc2_w"] + p["fc2_b"]
        cache.update(x=x, z1=z1, p1=p1, z2=z2, p2=p2, flat=flat, h1=h1, a3=a3)
        return logits, cache

    def predict_proba(self, X):
        logits, _ = self._forward(self._as_batch(X))
        return softmax(logits)

    def predict(self, X):
        """0-based class indices."""
        return self.predict_proba(X).argmax(axis=1)

    def predict_labels(self, X):
        """1-based class labels."""
        return self.predict(X) + 1

    def loss_and_grads(self, X, class_idx):
        """Summed cross entropy over the batch plus gradients per parameter."""
        x = self._as_batch(X)
        y = np.asarray(class_idx)
        logits, cache = self._forward(x)
        probs = softmax(logits)
        losses = cross_entropy(probs, y)

        p = self.params
        n = x.shape[0]
        dlogits = probs.copy()
        dlogits[np.arange(n), y] -= 1.0           # d(sum CE)/dlogits

        grads = {}
        grads["fc2_w"] = cache["a3"].T @ dlogits
        grads["fc2_b"] = dlogits.sum(axis=0)
        da3 = dlogits @ p["fc2_w"].T
        dh1 = da3 * (cache["h1"] > 0)
        grads["fc1_w"] = cache["flat"].T @ dh1
        grads["fc1_b"] = dh1.sum(axis=0)
        dflat = dh1 @ p["fc1_w"].T

        dp2 = dflat.reshape(cache["p2"].shape)
        da2 = _pool_backward(dp2, cache["pool2_in"], cache["z2"].shape)
        dz2 = da2 * (cache["z2"] > 0)
        dp1, grads["conv2_w"], grads["conv2_b"] = _conv_backward(
            dz2, cache["cols2"], cache["p1"].shape, p["conv2_w"]
        )
        da1 = _pool_backward(dp1, cache["pool1_in"], cache["z1"].shape)
        dz1 = da1 * (cache["z1"] > 0)
        _, grads["conv1_w"], grads["conv1_b"] = _conv_backward(
            dz1, cache["cols1"], x.shape, p["conv1_w"], need_dx=False
        )
        return float(losses.sum()), losses, grads

    def apply_gradients(self, grads, learning_rate):
        for name in PARAM_ORDER:
            self.params[name] -= np.asarray(learning_rate, dtype=self.dtype) * grads[name]

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}

    def set_params(self, params):
        for name in PARAM_ORDER:
            self.params[name] = np.array(params[name], dtype=self.dtype)


def gradient_check(net, X, class_idx, epsilon=1e-4):
    """Max relative error between analytic and central-difference gradients.

    Relative error uses max(|analytic|, |numeric|, 1e-6) as denominator so
    near-zero gradients compare on an absolute scale.
    """
    _, _, grads = net.loss_and_grads(X, class_idx)
    worst = 0.0
    for name in PARAM_ORDER:
        param = net.params[name]
        flat = param.reshape(-1)
        analytic = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            plus = net.loss_and_grads(X, class_idx)[0]
            flat[i] = orig - epsilon
            minus = net.loss_and_grads(X, class_idx)[0]
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * epsilon)
            denom = max(abs(analytic[i]), abs(numeric), 1e-6)
            worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
