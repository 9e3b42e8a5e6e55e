"""Easy-to-hard self-paced training of the target-only auxiliary network.

The auxiliary network sees nothing but target features and their
pseudo-labels. Each epoch ``n`` first picks the samples whose NLL is at most
``gamma**n * lam`` (the closed-form minimiser over the binary mask), then runs
one SGD pass on the masked NLL normalised by the full target count.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import (NetworkParams, OptimizerState, backward, forward, lsp_data_loss, nll,
                    sgd_step)

log = logging.getLogger(__name__)


@dataclass
class SelfPacedSchedule:
    lam: float = 0.1
    gamma: float = 1.3
    n: int = 0
    n_max: int = 10

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be > 0")
        if not self.gamma > 1:
            raise ValueError("gamma must be > 1")

    @property
    def threshold(self):
        return self.gamma ** self.n * self.lam


@dataclass(eq=False)
class SelectionMask:
    v: np.ndarray
    threshold: float

    @property
    def count(self):
        return int(self.v.sum())

    @property
    def saturated(self):
        return bool(self.v.all())


@dataclass(eq=False)
class FilteredTargetSet:
    indices: np.ndarray
    pseudo_labels: np.ndarray
    features: np.ndarray

    def __len__(self):
        return self.indices.size


def select(nlls, schedule: SelfPacedSchedule) -> SelectionMask:
    nlls = np.asarray(nlls, dtype=np.float64)
    if not np.all(np.isfinite(nlls)):
        raise ValueError("NLL values must be finite")
    if nlls.size and nlls.min() < 0:
        raise ValueError("negative NLL: inconsistent likelihoods")
    thr = schedule.threshold
    return SelectionMask((nlls <= thr).astype(np.int8), thr)


def self_paced_objective(nlls, v, threshold):
    """Value of the self-paced loss for a given mask (used to check ``select``)."""
    v = np.asarray(v, dtype=np.float64)
    return float((np.dot(v, nlls) - threshold * v.sum()) / v.size)


def _features_of(target):
    return np.asarray(getattr(target, "features", target), dtype=np.float64)


def refine(aux: NetworkParams, target, pseudo_labels, schedule: SelfPacedSchedule,
           optimizer: OptimizerState, batch_size: int = 32, seed=0, records=None):
    """Run epochs ``n = 0 .. n_max`` of self-paced training on ``aux`` (in place).

    ``target`` may be an :class:`UnlabeledSet` or a bare feature matrix; hidden
    labels are never read. Returns ``(aux, last_mask)``. If ``records`` is a
    list, one dict per epoch is appended to it.
    """
    x = _features_of(target)
    y = np.asarray(getattr(pseudo_labels, "labels", pseudo_labels), dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise ValueError("pseudo-labels must cover every target sample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_t = x.shape[0]
    mask = None
    for n in range(schedule.n_max + 1):
        schedule.n = n
        losses = nll(forward(aux, x), y)
        mask = select(losses, schedule)
        if mask.count == 0:
            log.info("self-paced epoch %d selected no samples", n)
        epoch_loss = 0.0
        if mask.count:
            order = rng.permutation(n_t)
            for start in range(0, n_t, batch_size):
                idx = order[start:start + batch_size]
                trace = forward(aux, x[idx])
                # per-batch estimate of sum_i v_i nll_i / N_t
                value, d_logits = lsp_data_loss(trace, y[idx], mask.v[idx], idx.size)
                epoch_loss += value * idx.size / n_t
                sgd_step(aux, backward(aux, trace, d_logits=d_logits), optimizer)
        if records is not None:
            records.append({
                "n": n,
                "threshold": mask.threshold,
                "selected": mask.count,
                "mean_nll": float(losses.mean()),
                "lsp": epoch_loss - mask.threshold * mask.count / n_t,
            })
    return aux, mask


def confidence_check(aux: NetworkParams, target, pseudo_labels, lam: float = 0.1) -> FilteredTargetSet:
    """Keep the target samples whose pseudo-label NLL under ``aux`` is at most ``lam``."""
    x = _features_of(target)
    y = np.asarray(getattr(pseudo_labels, "labels", pseudo_labels), dtype=np.int64)
    keep = np.flatnonzero(nll(forward(aux, x), y) <= lam)
    return FilteredTargetSet(keep, y[keep], x[keep])


def unfiltered(target, pseudo_labels) -> FilteredTargetSet:
    x = _features_of(target)
    y = np.asarray(getattr(pseudo_labels, "labels", pseudo_labels), dtype=np.int64)
    return FilteredTargetSet(np.arange(x.shape[0]), y.copy(), x)
