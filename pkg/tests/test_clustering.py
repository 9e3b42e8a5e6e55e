import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cauda.clustering import (CentroidSet, kmeans, moving_average_update, normalize_rows,
                              source_centroids)
from cauda.errors import ConfigError, DataError
from oracles import reference_lloyd, wcss


def cs(rows):
    rows = np.asarray(rows, dtype=float)
    return CentroidSet(rows, np.zeros(len(rows), dtype=np.int64))


def test_source_centroid_single_sample_per_class():
    x = np.array([[3.0, 4.0], [0.0, -2.0]])
    out = source_centroids(x, [0, 1], 2)
    np.testing.assert_allclose(out.centroids, [[0.6, 0.8], [0.0, -1.0]])


def test_source_centroid_mean_then_normalize():
    out = source_centroids(np.array([[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]), [0, 0, 1], 2)
    np.testing.assert_allclose(out.centroids[0], [0.7071067811865476] * 2)
    np.testing.assert_array_equal(out.counts, [2, 1])


def test_source_centroid_equivariance(rng):
    x = rng.standard_normal((30, 3))
    y = np.repeat(np.arange(3), 10)
    perm = np.array([2, 0, 1])
    a = source_centroids(x, y, 3).centroids
    b = source_centroids(x, perm[y], 3).centroids
    np.testing.assert_array_equal(b[perm], a)


def test_source_centroid_empty_class_named():
    with pytest.raises(DataError, match="class 1"):
        source_centroids(np.zeros((2, 2)), [0, 2], 3)


def test_kmeans_fixed_point_one_per_centroid():
    x = np.array([[1.0, 0.0], [0.0, 2.0], [-3.0, 0.0]])
    out, labels = kmeans(x, cs(x), 100, 1e-6)
    assert out.iterations == 1
    np.testing.assert_array_equal(labels, [0, 1, 2])


def test_kmeans_symmetric_pairs():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    out, labels = kmeans(x, cs([[0.0, 0.5], [10.0, 0.5]]), 100, 1e-6)
    np.testing.assert_array_equal(labels, [0, 0, 1, 1])
    np.testing.assert_allclose(out.centroids, normalize_rows(np.array([[0.0, 0.5], [10.0, 0.5]])))


def test_kmeans_config_errors():
    x = np.zeros((2, 2))
    with pytest.raises(ConfigError):
        kmeans(x, cs(np.eye(3)[:, :2]), 10, 1e-6)
    with pytest.raises(ConfigError):
        kmeans(x, cs(np.eye(2)), 0, 1e-6)


def random_instance(rng, n=None, k=None):
    k = k or int(rng.integers(2, 6))
    n = n or int(rng.integers(k, 201))
    centers = 4.0 * rng.standard_normal((k, 3))
    x = centers[rng.integers(0, k, n)] + rng.standard_normal((n, 3))
    init = x[rng.choice(n, k, replace=False)] + 0.1 * rng.standard_normal((k, 3))
    return x, init


def test_kmeans_matches_reference_lloyd():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        x, init = random_instance(rng)
        out, labels = kmeans(x, cs(init), 100, 1e-6)
        ref_c, ref_labels = reference_lloyd(x, init, 100, 1e-6)
        np.testing.assert_array_equal(labels, ref_labels)
        np.testing.assert_array_equal(out.centroids, ref_c)


def test_kmeans_empty_cluster_reseeded(rng):
    x = rng.standard_normal((20, 2))
    init = np.array([[0.0, 0.0], [100.0, 100.0], [101.0, 100.0]])
    out, labels = kmeans(x, cs(init), 100, 1e-6)
    assert np.all(np.isfinite(out.centroids))
    np.testing.assert_allclose(np.linalg.norm(out.centroids, axis=1), 1.0, atol=1e-12)
    ref_c, ref_labels = reference_lloyd(x, init, 100, 1e-6)
    np.testing.assert_array_equal(labels, ref_labels)


def test_kmeans_wcss_beats_worst_random_restart():
    rng = np.random.default_rng(50)
    x, _ = random_instance(rng, n=50, k=3)
    init = x[:3].copy()
    out, labels = kmeans(x, cs(init), 100, 1e-6)
    raw = np.array([x[labels == j].mean(0) for j in range(3)])
    ours = wcss(x, raw, labels)
    worst = 0.0
    for _ in range(100):
        start = x[rng.choice(50, 3, replace=False)]
        _, ref_labels = reference_lloyd(x, start, 100, 1e-6)
        means = np.array([x[ref_labels == j].mean(0) if np.any(ref_labels == j) else start[j]
                          for j in range(3)])
        worst = max(worst, wcss(x, means, ref_labels))
    assert ours <= worst
    _, ref_labels = reference_lloyd(x, init, 100, 1e-6)
    np.testing.assert_array_equal(labels, ref_labels)


def test_kmeans_wcss_non_increasing():
    rng = np.random.default_rng(7)
    for _ in range(20):
        x, init = random_instance(rng)
        out, _ = kmeans(x, cs(init), 100, 1e-6)
        h = np.array(out.wcss_history)
        assert np.all(np.diff(h) <= 1e-9 * max(1.0, h[0]))


def test_kmeans_permutation_equivariance():
    rng = np.random.default_rng(3)
    x, init = random_instance(rng, n=80, k=4)
    perm = np.array([3, 1, 0, 2])
    a, la = kmeans(x, cs(init), 100, 1e-6)
    b, lb = kmeans(x, cs(init[perm]), 100, 1e-6)
    np.testing.assert_allclose(b.centroids, a.centroids[perm], atol=1e-12)
    inv = np.argsort(perm)
    np.testing.assert_array_equal(inv[la], lb)


def test_moving_average_alpha_zero_single_feature():
    out = moving_average_update(cs([[1.0, 0.0]]), np.array([[3.0, 4.0]]), [0], alpha=0.0)
    np.testing.assert_allclose(out.centroids, [[0.6, 0.8]])


def test_moving_average_collinear_unchanged():
    out = moving_average_update(cs([[0.6, 0.8]]), np.array([[3.0, 4.0], [6.0, 8.0]]), [0, 0], 1.0)
    np.testing.assert_allclose(out.centroids, [[0.6, 0.8]], atol=1e-15)


def test_moving_average_orthogonal():
    out = moving_average_update(cs([[1.0, 0.0]]), np.array([[0.0, 1.0]]), [0], 1.0)
    np.testing.assert_allclose(out.centroids, [[0.7071067811865476] * 2], atol=1e-15)


def test_moving_average_empty_cluster_keeps_cache():
    cache = cs([[1.0, 0.0], [0.0, 1.0]])
    out = moving_average_update(cache, np.array([[1.0, 1.0]]), [0], 1.0)
    np.testing.assert_array_equal(out.centroids[1], [0.0, 1.0])
    np.testing.assert_array_equal(out.counts, [1, 0])


def test_moving_average_shape_errors():
    with pytest.raises(DataError):
        moving_average_update(cs([[1.0, 0.0]]), np.ones((2, 2)), [0, 1], 1.0)
    with pytest.raises(ConfigError):
        moving_average_update(cs([[1.0, 0.0]]), np.ones((1, 2)), [0], -1.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), alpha=st.floats(0.0, 5.0))
def test_moving_average_unit_norm(seed, alpha):
    rng = np.random.default_rng(seed)
    cache = cs(normalize_rows(rng.standard_normal((3, 4))))
    x = rng.standard_normal((10, 4))
    out = moving_average_update(cache, x, rng.integers(0, 3, 10), alpha)
    assert np.all(np.isfinite(out.centroids))
    np.testing.assert_allclose(np.linalg.norm(out.centroids, axis=1), 1.0, atol=1e-12)
