"""Hot numeric kernels.

Each kernel exists twice: a loop version compiled with numba (``*_nb``) and a
vectorised numpy version (``*_np``). The unsuffixed names are bound to the
numba version unless ``CAUDA_DISABLE_NUMBA`` is set. Both versions accumulate
in the same (row-major, sample-major) order so they agree to the last bit on
sums; distance reductions may differ by one ulp.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit


# ---------------------------------------------------------------------------
# linear assignment (shortest augmenting path, Jonker-Volgenant style)
# ---------------------------------------------------------------------------

@njit
def lsap_nb(cost):
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:].copy(), v[1:].copy()


def lsap_np(cost):
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            upd = free & (cur < minv[1:])
            minv[1:][upd] = cur[upd]
            way[1:][upd] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    col_of_row[p[1:] - 1] = np.arange(n)
    return col_of_row, u[1:].copy(), v[1:].copy()


# ---------------------------------------------------------------------------
# k-means building blocks
# ---------------------------------------------------------------------------

@njit
def nearest_centroid_nb(x, c):
    n, d = x.shape
    k = c.shape[0]
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n)
    for i in range(n):
        bi = 0
        bd = np.inf
        for j in range(k):
            s = 0.0
            for t in range(d):
                diff = x[i, t] - c[j, t]
                s += diff * diff
            if s < bd:
                bd = s
                bi = j
        labels[i] = bi
        best[i] = bd
    return labels, best


def nearest_centroid_np(x, c):
    d2 = sq_dists_np(x, c)
    labels = np.argmin(d2, axis=1).astype(np.int64)
    return labels, d2[np.arange(x.shape[0]), labels]


@njit
def cluster_sums_nb(x, labels, k):
    n, d = x.shape
    sums = np.zeros((k, d))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        a = labels[i]
        counts[a] += 1
        for t in range(d):
            sums[a, t] += x[i, t]
    return sums, counts


def cluster_sums_np(x, labels, k):
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return sums, counts


# ---------------------------------------------------------------------------
# pairwise squared distances
# ---------------------------------------------------------------------------

@njit
def sq_dists_nb(x, y):
    n, d = x.shape
    m = y.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(d):
                diff = x[i, t] - y[j, t]
                s += diff * diff
            out[i, j] = s
    return out


def sq_dists_np(x, y):
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


if HAVE_NUMBA:
    lsap = lsap_nb
    nearest_centroid = nearest_centroid_nb
    cluster_sums = cluster_sums_nb
    sq_dists = sq_dists_nb
else:
    lsap = lsap_np
    nearest_centroid = nearest_centroid_np
    cluster_sums = cluster_sums_np
    sq_dists = sq_dists_np


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
