"""Centroids, Lloyd k-means, and the spherical moving-average centroid memory."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import kernels
from .errors import ConfigError, DataError


@dataclass(eq=False)
class CentroidSet:
    centroids: np.ndarray
    counts: np.ndarray
    iterations: int = 0
    wcss_history: List[float] = field(default_factory=list, repr=False)

    @property
    def k(self):
        return self.centroids.shape[0]

    def copy(self):
        return CentroidSet(self.centroids.copy(), self.counts.copy(), self.iterations,
                           list(self.wcss_history))


def normalize_rows(x):
    """Unit L2 rows; all-zero rows are left at zero instead of becoming NaN."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def source_centroids(features, labels, k: int) -> CentroidSet:
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(labels, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= k):
        raise DataError("label out of range")
    sums, counts = kernels.cluster_sums(x, y, k)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise DataError(f"class {int(empty[0])} has no samples")
    return CentroidSet(normalize_rows(sums / counts[:, None]), counts)


def kmeans(features, init: CentroidSet, max_iters: int = 100, tol: float = 1e-6):
    """Lloyd's algorithm from the given initial centroids.

    Assignment uses squared Euclidean distance on the raw features; ties go
    to the lower centroid index. An empty cluster is reseeded with the sample
    farthest from its current centroid. Stops once the largest centroid
    displacement drops below ``tol``. The returned centroids are
    L2-normalised, the assignment is the one from the final pass.
    """
    x = np.ascontiguousarray(features, dtype=np.float64)
    c = np.array(init.centroids, dtype=np.float64)
    k = c.shape[0]
    if max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    if k > x.shape[0]:
        raise ConfigError(f"k={k} exceeds the number of samples {x.shape[0]}")
    if x.shape[1] != c.shape[1]:
        raise DataError("feature and centroid dimensions differ")

    history = []
    it = 0
    for it in range(1, max_iters + 1):
        labels, dist = kernels.nearest_centroid(x, c)
        history.append(float(dist.sum()))
        sums, counts = kernels.cluster_sums(x, labels, k)
        new = c.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        if not filled.all():
            dist = dist.copy()
            for j in np.flatnonzero(~filled):
                far = int(np.argmax(dist))
                new[j] = x[far]
                dist[far] = -1.0
        shift = float(np.max(np.linalg.norm(new - c, axis=1)))
        c = new
        if shift < tol:
            break
    _, counts = kernels.cluster_sums(x, labels, k)
    return CentroidSet(normalize_rows(c), counts, it, history), labels


def moving_average_update(cache: CentroidSet, features, assignment, alpha: float = 1.0) -> CentroidSet:
    """``c_k <- normalize(normalize(mean of unit assigned features) + alpha * c_k)``.

    Clusters that received no samples keep their cached centroid.
    """
    if alpha < 0:
        raise ConfigError("alpha must be >= 0")
    x = np.ascontiguousarray(features, dtype=np.float64)
    a = np.ascontiguousarray(assignment, dtype=np.int64)
    k = cache.k
    if a.shape != (x.shape[0],) or x.shape[1] != cache.centroids.shape[1]:
        raise DataError("features, assignment and centroids disagree in shape")
    if a.size and (a.min() < 0 or a.max() >= k):
        raise DataError("assignment out of range")
    sums, counts = kernels.cluster_sums(normalize_rows(x), a, k)
    out = cache.centroids.copy()
    hit = counts > 0
    step = normalize_rows(sums[hit] / counts[hit, None])
    out[hit] = normalize_rows(step + alpha * cache.centroids[hit])
    return CentroidSet(out, counts, cache.iterations, list(cache.wcss_history))
