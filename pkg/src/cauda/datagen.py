"""Synthetic source/target pairs and CSV feature ingestion.

All generators are pure functions of their arguments: every call builds its
own ``numpy.random.Generator`` from ``seed``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError


@dataclass(eq=False)
class LabeledSet:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels must have one entry per feature row")
        if self.num_classes < 1:
            raise DataError("num_classes must be positive")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        missing = np.flatnonzero(np.bincount(self.labels, minlength=self.num_classes) == 0)
        if missing.size:
            raise DataError(f"class {int(missing[0])} has no samples")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain NaN or Inf")

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]


@dataclass(eq=False)
class UnlabeledSet:
    features: np.ndarray
    hidden_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain NaN or Inf")
        if self.hidden_labels is not None:
            self.hidden_labels = np.asarray(self.hidden_labels, dtype=np.int64)
            if self.hidden_labels.shape != (self.features.shape[0],):
                raise DataError("hidden_labels must have one entry per feature row")
            if self.hidden_labels.size and self.hidden_labels.min() < 0:
                raise DataError("hidden_labels must be non-negative")

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]


@dataclass
class ShiftSpec:
    rotation_deg: float = 30.0
    translation: Optional[Sequence[float]] = None
    class_sep: float = 3.5
    noise_std: float = 1.0
    samples_per_class_source: int = 200
    samples_per_class_target: int = 200

    def __post_init__(self):
        if not self.class_sep > 0:
            raise ConfigError("class_sep must be > 0")
        if not self.noise_std >= 0:
            raise ConfigError("noise_std must be >= 0")
        if self.samples_per_class_source < 1 or self.samples_per_class_target < 1:
            raise ConfigError("samples per class must be positive")


def _rotation(deg):
    theta = math.radians(deg)
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _shift_points(points, rotation_deg, translation, center=None):
    out = points.copy()
    xy = out[:, :2]
    if center is not None:
        xy = xy - center
    # row vectors: x' = x R^T
    xy = xy @ _rotation(rotation_deg).T
    if center is not None:
        xy = xy + center
    out[:, :2] = xy
    return out + translation


def _translation(spec, dim):
    if spec.translation is None:
        return np.zeros(dim)
    t = np.asarray(spec.translation, dtype=np.float64).ravel()
    if t.size == 1:
        return np.full(dim, t[0])
    if t.size != dim:
        raise ConfigError(f"translation has length {t.size}, expected {dim}")
    return t


def class_means(spec: ShiftSpec, num_classes: int, dim: int) -> np.ndarray:
    """Source class means: evenly spaced on a circle of radius ``class_sep``."""
    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    means = np.zeros((num_classes, dim))
    means[:, 0] = spec.class_sep * np.cos(angles)
    means[:, 1] = spec.class_sep * np.sin(angles)
    return means


def target_class_means(spec: ShiftSpec, num_classes: int, dim: int) -> np.ndarray:
    return _shift_points(class_means(spec, num_classes, dim), spec.rotation_deg, _translation(spec, dim))


def generate_gaussian_pair(spec: ShiftSpec, num_classes: int, dim: int, seed: int):
    """Isotropic Gaussian blobs for the source, rotated and translated for the target.

    Rotation acts on the first two coordinates only. Target hidden labels are
    filled in for evaluation.
    """
    if num_classes < 2:
        raise ConfigError("num_classes must be >= 2")
    if dim < 2:
        raise ConfigError("dim must be >= 2")
    rng = np.random.default_rng(seed)
    means = class_means(spec, num_classes, dim)
    translation = _translation(spec, dim)

    ns, nt = spec.samples_per_class_source, spec.samples_per_class_target
    ys = np.repeat(np.arange(num_classes), ns)
    xs = means[ys] + spec.noise_std * rng.standard_normal((ys.size, dim))
    yt = np.repeat(np.arange(num_classes), nt)
    xt = means[yt] + spec.noise_std * rng.standard_normal((yt.size, dim))
    xt = _shift_points(xt, spec.rotation_deg, translation)
    return LabeledSet(xs, ys, num_classes), UnlabeledSet(xt, yt)


MOONS_CENTER = np.array([0.5, 0.25])


def _moons(n, noise_std, rng):
    n0 = (n + 1) // 2
    n1 = n - n0
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    x = np.vstack([upper, lower])
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    if noise_std > 0:
        x = x + noise_std * rng.standard_normal(x.shape)
    return x, y


def generate_two_moons_pair(noise_std: float, rotation_deg: float, n_source: int,
                            n_target: int, seed: int):
    """Two interleaved half circles; the target is rotated about the moons' centre."""
    if noise_std < 0:
        raise ConfigError("noise_std must be >= 0")
    if n_source < 2 or n_target < 2:
        raise ConfigError("n_source and n_target must be >= 2")
    rng = np.random.default_rng(seed)
    xs, ys = _moons(n_source, noise_std, rng)
    xt, yt = _moons(n_target, noise_std, rng)
    xt = _shift_points(xt, rotation_deg, np.zeros(2), center=MOONS_CENTER)
    return LabeledSet(xs, ys, 2), UnlabeledSet(xt, yt)


# ---------------------------------------------------------------------------
# CSV: d feature columns then one integer label column, -1 = label absent
# ---------------------------------------------------------------------------

def load_csv(path, labeled: bool):
    path = Path(path)
    feats, labels = [], []
    width = None
    with path.open(newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise DataError(f"row {row_no}: need at least one feature and a label column")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(f"row {row_no}: expected {width} columns, got {len(row)}")
            try:
                x = [float(cell) for cell in row[:-1]]
                y = int(row[-1].strip())
            except ValueError as exc:
                raise DataError(f"row {row_no}: {exc}") from None
            if not all(math.isfinite(v) for v in x):
                raise DataError(f"row {row_no}: non-finite feature value")
            if labeled and y < 0:
                raise DataError(f"row {row_no}: label -1 not allowed in a labeled set")
            if y < -1:
                raise DataError(f"row {row_no}: invalid label {y}")
            feats.append(x)
            labels.append(y)
    if not feats:
        raise DataError(f"{path}: no rows")
    x = np.array(feats, dtype=np.float64)
    y = np.array(labels, dtype=np.int64)
    if labeled:
        return LabeledSet(x, y, int(y.max()) + 1)
    if np.all(y == -1):
        return UnlabeledSet(x, None)
    if np.any(y == -1):
        raise DataError(f"{path}: mix of hidden labels and -1 sentinels")
    return UnlabeledSet(x, y)


def write_csv(path, data) -> None:
    if isinstance(data, LabeledSet):
        labels = data.labels
    elif data.hidden_labels is not None:
        labels = data.hidden_labels
    else:
        labels = np.full(len(data), -1, dtype=np.int64)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row, y in zip(data.features, labels):
            w.writerow([repr(float(v)) for v in row] + [int(y)])
