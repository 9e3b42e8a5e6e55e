"""Optimal source-to-target cluster matching and pseudo-label emission."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .clustering import CentroidSet, normalize_rows
from .errors import DataError


@dataclass(eq=False)
class Assignment:
    perm: np.ndarray  # perm[j] = source class matched to target cluster j
    total_cost: float


@dataclass(eq=False)
class PseudoLabelSet:
    labels: np.ndarray
    cluster_of: np.ndarray


def build_cost(source: CentroidSet, target: CentroidSet) -> np.ndarray:
    """``cost[i, j] = ||c_i^source - c_j^target||``."""
    cs, ct = source.centroids, target.centroids
    if cs.shape != ct.shape:
        raise DataError(f"centroid sets differ: {cs.shape} vs {ct.shape}")
    d2 = kernels.sq_dists(np.ascontiguousarray(cs), np.ascontiguousarray(ct))
    return np.sqrt(np.maximum(d2, 0.0))


def _has_matching(tight, rows, free_cols):
    """Kuhn's augmenting-path test for a perfect matching of ``rows``."""
    match = {}

    def augment(r, seen):
        for c in free_cols:
            if tight[r, c] and c not in seen:
                seen.add(c)
                if c not in match or augment(match[c], seen):
                    match[c] = r
                    return True
        return False

    return all(augment(r, set()) for r in rows)


def _lexicographic(cost, col_of_row, u, v):
    """Smallest row->column vector among the optimal matchings.

    Optimal matchings are exactly the perfect matchings on zero-reduced-cost
    edges of the optimal dual, so a greedy pass with a feasibility check
    finds the lexicographic minimum.
    """
    n = cost.shape[0]
    tol = 1e-9 * max(1.0, float(np.max(np.abs(cost))))
    tight = (cost - u[:, None] - v[None, :]) <= tol
    if tight.sum() == n:
        return col_of_row
    out = np.empty(n, dtype=np.int64)
    free = list(range(n))
    for i in range(n):
        for c in free:
            if not tight[i, c]:
                continue
            rest = [f for f in free if f != c]
            if _has_matching(tight, range(i + 1, n), rest):
                out[i] = c
                free = rest
                break
        else:  # pragma: no cover - dual tolerance too tight; keep the raw optimum
            return col_of_row
    return out


def _total(cost, perm):
    return float(sum(cost[perm[j], j] for j in range(perm.size)))


def hungarian(cost) -> Assignment:
    """Minimum-cost perfect matching of a square cost matrix.

    Rows are source classes, columns target clusters. Among equal-cost
    optima the one whose row->column vector is lexicographically smallest
    wins.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DataError(f"cost matrix must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise DataError("cost matrix has non-finite entries")
    n = c.shape[0]
    if n == 0:
        raise DataError("empty cost matrix")
    c = np.ascontiguousarray(c)
    col_of_row, u, v = kernels.lsap(c)
    raw = np.empty(n, dtype=np.int64)
    raw[col_of_row] = np.arange(n)
    lex = _lexicographic(c, col_of_row, u, v)
    perm = np.empty(n, dtype=np.int64)
    perm[lex] = np.arange(n)
    if _total(c, perm) > _total(c, raw):
        perm = raw
    return Assignment(perm, _total(c, perm))


def assign_pseudolabels(cluster_of, assignment: Assignment) -> PseudoLabelSet:
    a = np.asarray(cluster_of, dtype=np.int64)
    k = assignment.perm.size
    if a.size and (a.min() < 0 or a.max() >= k):
        raise DataError("cluster index out of range")
    return PseudoLabelSet(assignment.perm[a], a)


def nearest_source_labels(features, source: CentroidSet) -> np.ndarray:
    """Baseline labeler: each target sample takes its nearest source centroid's class.

    Features are L2-normalised first so they live on the same sphere as the
    stored centroids.
    """
    x = normalize_rows(np.asarray(features, dtype=np.float64))
    labels, _ = kernels.nearest_centroid(x, np.ascontiguousarray(source.centroids))
    return labels
