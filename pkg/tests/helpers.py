"""Shared oracles and dataset builders for the test suite.

Everything here is deliberately written the slow, obvious way: brute
force enumeration, per-pixel loops, plain-float filter algebra. The
production code must agree with these, not the other way around.
"""

from __future__ import annotations

import itertools
import math
from pathlib import Path

import numpy as np

from vadkit.data import DEFAULT_CLASSES, DatasetManifest, ManifestEntry
from vadkit.features import FeatureSequence, feature_cache_path, store_features


# ---- assignment -------------------------------------------------------------

def brute_force_assignment_cost(cost: np.ndarray) -> float:
    """Minimum total cost over every complete matching of the smaller side."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.shape[0] > cost.shape[1]:
        cost = cost.T
    rows, cols = cost.shape
    best = math.inf
    for perm in itertools.permutations(range(cols), rows):
        total = 0.0
        for r, c in enumerate(perm):
            total += cost[r, c]
        best = min(best, total)
    return best


# ---- convolution ------------------------------------------------------------

def direct_conv2d_reflect(img: np.ndarray, kernel_1d: np.ndarray) -> np.ndarray:
    """Full 2-D convolution with the outer-product kernel and mirrored
    borders, computed one output pixel at a time via numpy's own reflect
    padding."""
    img = np.asarray(img, dtype=np.float64)
    kernel2d = np.outer(kernel_1d, kernel_1d)
    r = kernel_1d.shape[0] // 2
    if r == 0:
        return img * kernel2d[0, 0]
    padded = np.pad(img, r, mode="reflect")
    h, w = img.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = float(np.sum(padded[y:y + 2 * r + 1, x:x + 2 * r + 1]
                                     * kernel2d))
    return out


# ---- resize -----------------------------------------------------------------

def bilinear_resize_oracle(img: np.ndarray, dst_h: int, dst_w: int) -> np.ndarray:
    """Per-pixel bilinear interpolation with half-pixel centers."""
    img = np.asarray(img, dtype=np.float64)
    src_h, src_w = img.shape[:2]
    out_shape = (dst_h, dst_w) + img.shape[2:]
    out = np.zeros(out_shape)
    for dy in range(dst_h):
        sy = (dy + 0.5) * src_h / dst_h - 0.5
        sy = min(max(sy, 0.0), src_h - 1.0)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, src_h - 1)
        fy = sy - y0
        for dx in range(dst_w):
            sx = (dx + 0.5) * src_w / dst_w - 0.5
            sx = min(max(sx, 0.0), src_w - 1.0)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, src_w - 1)
            fx = sx - x0
            top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
            bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
            out[dy, dx] = top * (1 - fy) + bottom * fy
    return out


# ---- Kalman -----------------------------------------------------------------

class ScalarCvFilter:
    """Two-state (value, velocity) constant-velocity filter in plain floats.

    The production filter's block-diagonal structure makes it equivalent
    to four of these run side by side.
    """

    def __init__(self, z: float, p_value: float, p_velocity: float):
        self.x = [float(z), 0.0]
        self.p = [[p_value, 0.0], [0.0, p_velocity]]

    def predict(self, q_value: float, q_velocity: float) -> None:
        x0 = self.x[0] + self.x[1]
        p = self.p
        p00 = p[0][0] + p[0][1] + p[1][0] + p[1][1] + q_value
        p01 = p[0][1] + p[1][1]
        p10 = p[1][0] + p[1][1]
        p11 = p[1][1] + q_velocity
        self.x = [x0, self.x[1]]
        self.p = [[p00, p01], [p10, p11]]

    def update(self, z: float, r: float) -> None:
        s = self.p[0][0] + r
        k0 = self.p[0][0] / s
        k1 = self.p[1][0] / s
        innovation = z - self.x[0]
        self.x = [self.x[0] + k0 * innovation, self.x[1] + k1 * innovation]
        p = self.p
        self.p = [[p[0][0] - k0 * s * k0, p[0][1] - k0 * s * k1],
                  [p[1][0] - k1 * s * k0, p[1][1] - k1 * s * k1]]


class ScalarKalmanOracle:
    """Four decoupled scalar filters mirroring the box-state filter."""

    _STD_POS = 1.0 / 20.0
    _STD_VEL = 1.0 / 160.0

    def __init__(self, z: np.ndarray):
        h = float(z[3])
        self.filters = []
        for i in range(4):
            if i == 2:  # aspect ratio uses fixed absolute noise
                f = ScalarCvFilter(float(z[i]), 1e-2 ** 2, 1e-5 ** 2)
            else:
                f = ScalarCvFilter(float(z[i]), (2 * self._STD_POS * h) ** 2,
                                   (10 * self._STD_VEL * h) ** 2)
            self.filters.append(f)

    @property
    def height(self) -> float:
        return self.filters[3].x[0]

    def predict(self) -> None:
        h = self.height
        for i, f in enumerate(self.filters):
            if i == 2:
                f.predict(1e-2 ** 2, 1e-5 ** 2)
            else:
                f.predict((self._STD_POS * h) ** 2, (self._STD_VEL * h) ** 2)

    def update(self, z: np.ndarray) -> None:
        h = self.height
        for i, f in enumerate(self.filters):
            r = 1e-1 ** 2 if i == 2 else (self._STD_POS * h) ** 2
            f.update(float(z[i]), r)

    def mean8(self) -> np.ndarray:
        out = np.zeros(8)
        for i, f in enumerate(self.filters):
            out[i] = f.x[0]
            out[4 + i] = f.x[1]
        return out

    def cov8(self) -> np.ndarray:
        out = np.zeros((8, 8))
        for i, f in enumerate(self.filters):
            out[i, i] = f.p[0][0]
            out[i, 4 + i] = f.p[0][1]
            out[4 + i, i] = f.p[1][0]
            out[4 + i, 4 + i] = f.p[1][1]
        return out


# ---- metrics ----------------------------------------------------------------

def per_sample_counts(y_true, y_pred, cls: int) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) for one class, counted sample by sample."""
    tp = fp = tn = fn = 0
    for t, p in zip(y_true, y_pred):
        if t == cls and p == cls:
            tp += 1
        elif t != cls and p == cls:
            fp += 1
        elif t == cls and p != cls:
            fn += 1
        else:
            tn += 1
    return tp, fp, tn, fn


def mann_whitney_auc(scores, labels) -> float:
    """Pairwise win rate of positives over negatives, ties count half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


# ---- gradients --------------------------------------------------------------

def relative_error(numeric, analytic):
    """|n - a| / max(|n|, |a|, 1e-6), elementwise for arrays."""
    numeric = np.asarray(numeric, dtype=np.float64)
    analytic = np.asarray(analytic, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(numeric), np.abs(analytic)), 1e-6)
    return np.abs(numeric - analytic) / denom


def finite_difference_grads(loss_fn, params, step: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences over every entry of every parameter array.

    loss_fn() must read the current contents of the arrays in
    params.as_dict(); the arrays are perturbed in place and restored.
    """
    grads = {}
    for name, array in params.as_dict().items():
        grad = np.zeros_like(array, dtype=np.float64)
        flat = array.reshape(-1)
        for i in range(flat.shape[0]):
            original = flat[i]
            flat[i] = original + step
            plus = loss_fn()
            flat[i] = original - step
            minus = loss_fn()
            flat[i] = original
            grad.reshape(-1)[i] = (plus - minus) / (2 * step)
        grads[name] = grad
    return grads


# ---- datasets ---------------------------------------------------------------

def make_separable_dataset(root: Path,
                           classes: tuple[str, ...] = DEFAULT_CLASSES,
                           per_class: int = 10,
                           t_len: int = 20,
                           dim: int = 16,
                           seed: int = 0,
                           noise: float = 0.3,
                           vary_valid: bool = False
                           ) -> tuple[DatasetManifest, Path]:
    """Write a linearly separable feature-cache corpus under root.

    Each class gets its own direction in feature space; sequences are
    that direction plus timestep noise. Returns (manifest, cache_root).
    """
    cache_root = Path(root) / "features"
    rng = np.random.default_rng(seed)
    directions = rng.normal(0.0, 1.0, (len(classes), dim))
    directions *= 2.0 / np.linalg.norm(directions, axis=1, keepdims=True)
    entries = []
    for c, label in enumerate(classes):
        for j in range(per_class):
            video_id = f"{label.lower()}_{j:02d}"
            matrix = directions[c] + rng.normal(0.0, noise, (t_len, dim))
            valid = t_len - (j % 3) if vary_valid else t_len
            seq = FeatureSequence(video_id, matrix.astype(np.float32),
                                  max(valid, 1), label)
            store_features(seq, feature_cache_path(cache_root, video_id))
            entries.append(ManifestEntry(video_id, label, f"frames/{video_id}"))
    return DatasetManifest(tuple(entries), tuple(classes)), cache_root
