"""Reference implementations that share no code with the package under test.

Everything here is deliberately naive: explicit Python loops, enumeration,
central differences.
"""
import itertools
import math

import numpy as np


def brute_force_assignment(cost):
    """Minimum over all permutations; sums in target-column order."""
    cost = np.asarray(cost, dtype=float)
    k = cost.shape[0]
    best, best_perm = math.inf, None
    for perm in itertools.permutations(range(k)):
        total = 0.0
        for j in range(k):
            total += cost[perm[j], j]
        if total < best:
            best, best_perm = total, perm
    return best, best_perm


def reference_lloyd(x, init, max_iters=100, tol=1e-6):
    """Textbook Lloyd with the same stopping and empty-cluster rules, in loops."""
    x = [list(map(float, row)) for row in x]
    c = [list(map(float, row)) for row in init]
    n, d, k = len(x), len(x[0]), len(c)
    labels = [0] * n
    for _ in range(max_iters):
        best = [0.0] * n
        for i in range(n):
            bj, bd = 0, math.inf
            for j in range(k):
                s = 0.0
                for t in range(d):
                    diff = x[i][t] - c[j][t]
                    s += diff * diff
                if s < bd:
                    bj, bd = j, s
            labels[i], best[i] = bj, bd
        sums = [[0.0] * d for _ in range(k)]
        counts = [0] * k
        for i in range(n):
            counts[labels[i]] += 1
            for t in range(d):
                sums[labels[i]][t] += x[i][t]
        new = [row[:] for row in c]
        for j in range(k):
            if counts[j]:
                new[j] = [s / counts[j] for s in sums[j]]
        for j in range(k):
            if not counts[j]:
                far = max(range(n), key=lambda i: (best[i], -i))
                new[j] = x[far][:]
                best[far] = -1.0
        shift = max(np.linalg.norm(np.array(new[j]) - np.array(c[j])) for j in range(k))
        c = new
        if shift < tol:
            break
    c = np.array(c)
    return c / np.linalg.norm(c, axis=1, keepdims=True), np.array(labels)


def wcss(x, centroids, labels):
    return float(sum(np.sum((x[i] - centroids[labels[i]]) ** 2) for i in range(len(x))))


def double_loop_mmd(xs, ys, xt, yt, classes, sigma):
    """Per-class biased MMD^2 from the three explicit kernel double sums."""
    def k(u, v, s):
        return math.exp(-sum((a - b) ** 2 for a, b in zip(u, v)) / (2.0 * s * s))

    terms = []
    for c in classes:
        s = sigma[c] if isinstance(sigma, dict) else sigma
        a = [xs[i] for i in range(len(xs)) if ys[i] == c]
        b = [xt[i] for i in range(len(xt)) if yt[i] == c]
        if not a or not b:
            continue
        ss = sum(k(p, q, s) for p in a for q in a) / len(a) ** 2
        tt = sum(k(p, q, s) for p in b for q in b) / len(b) ** 2
        st = sum(k(p, q, s) for p in a for q in b) / (len(a) * len(b))
        terms.append(ss + tt - 2.0 * st)
    return sum(terms) / len(terms)


def central_difference(f, x, h=1e-5):
    """Gradient of scalar ``f`` at flat vector ``x`` by central differences."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2.0 * h)
    return g


def relative_error(a, b, floor=1e-8):
    """``||a - b|| / max(||a||, ||b||)`` over one parameter block."""
    a, b = np.ravel(a), np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))


def nearest_mean_classifier(x_train, y_train, k):
    means = np.array([x_train[y_train == c].mean(axis=0) for c in range(k)])

    def predict(x):
        d = ((x[:, None, :] - means[None]) ** 2).sum(-1)
        return d.argmin(1)

    return predict
