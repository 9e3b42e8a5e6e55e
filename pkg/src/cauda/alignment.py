"""Class-aware batches and per-class RBF MMD losses.

The discrepancy is the biased (V-statistic) MMD^2 evaluated per class and
averaged over the classes present on both sides of the batch. The same
estimator runs on feature embeddings (center-to-center) and on softmax
outputs (probability-to-probability). Bandwidths are treated as constants
during differentiation.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConfigError, DataError
from .model import NetworkParams, backward, cross_entropy, cross_entropy_grad, forward

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-3


KERNEL_MODES = ("median", "class_median", "fixed")


@dataclass
class KernelSpec:
    """RBF bandwidth rule.

    ``median``: median pairwise distance over the whole batch.
    ``class_median``: the same heuristic evaluated separately on each class's
    pooled source and target samples.
    ``fixed``: ``sigma``.
    """
    mode: str = "class_median"
    sigma: float = 1.0

    def __post_init__(self):
        if self.mode not in KERNEL_MODES:
            raise ConfigError(f"unknown bandwidth mode {self.mode!r}")
        if not self.sigma > 0:
            raise ConfigError("sigma must be > 0")

    def resolve(self, xs, ys, xt, yt, classes):
        """Bandwidth as a float, or a ``{class: sigma}`` dict for ``class_median``."""
        if self.mode == "fixed":
            return self.sigma
        if self.mode == "median":
            return median_bandwidth(np.vstack([xs, xt]))
        return {int(k): median_bandwidth(np.vstack([xs[ys == k], xt[yt == k]])) for k in classes}


@functools.lru_cache(maxsize=64)
def _upper(n):
    return np.triu_indices(n, k=1)


def median_bandwidth(points):
    x = np.ascontiguousarray(points, dtype=np.float64)
    if x.shape[0] < 2:
        return 1.0
    d2 = kernels.sq_dists(x, x)
    iu = _upper(x.shape[0])
    return max(float(np.median(np.sqrt(np.maximum(d2[iu], 0.0)))), SIGMA_FLOOR)


def rbf(u, v, spec: KernelSpec, sigma: Optional[float] = None) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DataError("rbf arguments differ in dimension")
    s = spec.sigma if sigma is None else sigma
    diff = u - v
    return float(np.exp(-np.dot(diff, diff) / (2.0 * s * s)))


@dataclass(eq=False)
class ClassBatch:
    classes: np.ndarray
    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    target_y: np.ndarray
    source_idx: np.ndarray
    target_idx: np.ndarray  # indices into the full target set


def _draw(rng, members, n):
    if n >= members.size:
        if n == members.size:
            return rng.permutation(members)
        return rng.choice(members, size=n, replace=True)
    return rng.choice(members, size=n, replace=False)


def sample_class_batch(source, filtered, k_b: int, n_source: int = 8,
                       n_target: Optional[int] = None, seed=0) -> Optional[ClassBatch]:
    """Pick ``k_b`` classes present in both domains, then samples per class.

    Classes are drawn uniformly without replacement. A class with fewer
    members than requested is sampled with replacement. Returns ``None``
    when no class is shared.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_target = n_source if n_target is None else n_target
    shared = np.intersect1d(np.unique(source.labels), np.unique(filtered.pseudo_labels))
    if shared.size == 0:
        log.debug("no class shared between source and filtered target")
        return None
    if k_b > shared.size:
        log.debug("only %d shared classes, wanted %d", shared.size, k_b)
    classes = np.sort(rng.choice(shared, size=min(k_b, shared.size), replace=False))
    s_idx, t_pos = [], []
    for k in classes:
        s_idx.append(_draw(rng, np.flatnonzero(source.labels == k), n_source))
        t_pos.append(_draw(rng, np.flatnonzero(filtered.pseudo_labels == k), n_target))
    s_idx = np.concatenate(s_idx)
    t_pos = np.concatenate(t_pos)
    return ClassBatch(classes, source.features[s_idx], source.labels[s_idx],
                      filtered.features[t_pos], filtered.pseudo_labels[t_pos],
                      s_idx, filtered.indices[t_pos])


def class_mmd(xs, ys, xt, yt, classes, sigma):
    """Mean over classes of the biased MMD^2, with gradients w.r.t. both sample sets.

    ``sigma`` is a float or a per-class mapping. Returns ``(value, d_xs, d_xt)``.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    xt = np.ascontiguousarray(xt, dtype=np.float64)
    gs = np.zeros_like(xs)
    gt = np.zeros_like(xt)
    terms = []
    for k in classes:
        si = np.flatnonzero(ys == k)
        ti = np.flatnonzero(yt == k)
        if si.size == 0 or ti.size == 0:
            log.info("class %d has an empty side; dropped from the discrepancy", k)
            continue
        a, b = xs[si], xt[ti]
        ns, nt = si.size, ti.size
        s = sigma[int(k)] if isinstance(sigma, dict) else sigma
        inv = 1.0 / (s * s)
        kss = np.exp(-0.5 * inv * kernels.sq_dists(a, a))
        ktt = np.exp(-0.5 * inv * kernels.sq_dists(b, b))
        kst = np.exp(-0.5 * inv * kernels.sq_dists(a, b))
        terms.append((si, ti, kss, ktt, kst, a, b, ns, nt, inv))
    if not terms:
        return 0.0, gs, gt
    m = len(terms)
    total = 0.0
    for si, ti, kss, ktt, kst, a, b, ns, nt, inv in terms:
        total += float(kss.sum() / ns ** 2 + ktt.sum() / nt ** 2 - 2.0 * kst.sum() / (ns * nt))
        # d k(x, y) / dx = -k (x - y) / sigma^2
        g_a = (-2.0 * inv / ns ** 2) * (kss.sum(1)[:, None] * a - kss @ a)
        g_a -= (-2.0 * inv / (ns * nt)) * (kst.sum(1)[:, None] * a - kst @ b)
        g_b = (-2.0 * inv / nt ** 2) * (ktt.sum(1)[:, None] * b - ktt @ b)
        g_b -= (-2.0 * inv / (ns * nt)) * (kst.sum(0)[:, None] * b - kst.T @ a)
        gs[si] += g_a / m
        gt[ti] += g_b / m
    return total / m, gs, gt


def c2c_loss(batch: ClassBatch, source_features, target_features, spec: KernelSpec,
             with_grad=False):
    sigma = spec.resolve(source_features, batch.source_y, target_features, batch.target_y,
                         batch.classes)
    value, gs, gt = class_mmd(source_features, batch.source_y, target_features,
                              batch.target_y, batch.classes, sigma)
    return (value, gs, gt) if with_grad else value


def p2p_loss(batch: ClassBatch, source_probs, target_probs, spec: KernelSpec, with_grad=False):
    sigma = spec.resolve(source_probs, batch.source_y, target_probs, batch.target_y,
                         batch.classes)
    value, gs, gt = class_mmd(source_probs, batch.source_y, target_probs,
                              batch.target_y, batch.classes, sigma)
    return (value, gs, gt) if with_grad else value


LOSS_MODES = ("da", "c2c", "p2p", "ce_hard")


def total_loss(params: NetworkParams, batch: ClassBatch, tau1=0.3, tau2=0.3,
               feature_kernel: Optional[KernelSpec] = None,
               prob_kernel: Optional[KernelSpec] = None, mode: str = "da"):
    """``tau1 * C2C + tau2 * P2P + CE(source)`` and its parameter gradient.

    ``mode`` switches off terms for ablations: ``c2c`` and ``p2p`` keep one
    discrepancy, ``ce_hard`` replaces both with cross-entropy on the target
    pseudo-labels. Returns ``(value, parts, grads)``.
    """
    if mode not in LOSS_MODES:
        raise ConfigError(f"unknown loss mode {mode!r}")
    feature_kernel = feature_kernel or KernelSpec()
    prob_kernel = prob_kernel or KernelSpec()
    ts = forward(params, batch.source_x)
    tt = forward(params, batch.target_x)
    ce = cross_entropy(ts, batch.source_y)
    ds_logits = cross_entropy_grad(ts, batch.source_y)
    dt_logits = None
    ds_feat = dt_feat = ds_prob = dt_prob = None
    parts = {"ce": ce, "c2c": 0.0, "p2p": 0.0, "ce_target": 0.0}
    value = ce
    if mode in ("da", "c2c") and tau1 != 0.0:
        c2c, gs, gt = c2c_loss(batch, ts.features, tt.features, feature_kernel, with_grad=True)
        parts["c2c"] = c2c
        value = value + tau1 * c2c
        ds_feat, dt_feat = tau1 * gs, tau1 * gt
    if mode in ("da", "p2p") and tau2 != 0.0:
        p2p, gs, gt = p2p_loss(batch, ts.probs, tt.probs, prob_kernel, with_grad=True)
        parts["p2p"] = p2p
        value = value + tau2 * p2p
        ds_prob, dt_prob = tau2 * gs, tau2 * gt
    if mode == "ce_hard":
        parts["ce_target"] = cross_entropy(tt, batch.target_y)
        value = value + parts["ce_target"]
        dt_logits = cross_entropy_grad(tt, batch.target_y)
    grads = backward(params, ts, d_features=ds_feat, d_probs=ds_prob, d_logits=ds_logits)
    if dt_feat is not None or dt_prob is not None or dt_logits is not None:
        grads = grads + backward(params, tt, d_features=dt_feat, d_probs=dt_prob, d_logits=dt_logits)
    return value, parts, grads
