"""Small tanh MLP feature extractor + linear softmax classifier.

Gradients are written out by hand. ``backward`` takes the upstream gradient
with respect to any of the three outputs a loss can touch (features,
probabilities, logits) so every loss in the package shares one reverse pass.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import DataError

Layer = Tuple[np.ndarray, np.ndarray]


@dataclass(eq=False)
class NetworkParams:
    extractor: List[Layer]
    classifier: Layer

    def __post_init__(self):
        prev = None
        for w, b in self.extractor + [self.classifier]:
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DataError("layer weight must be (in, out) and bias (out,)")
            if prev is not None and w.shape[0] != prev:
                raise DataError(f"layer shapes do not chain: {prev} -> {w.shape[0]}")
            prev = w.shape[1]

    @property
    def in_dim(self):
        return (self.extractor[0][0] if self.extractor else self.classifier[0]).shape[0]

    @property
    def feature_dim(self):
        return self.classifier[0].shape[0]

    @property
    def num_classes(self):
        return self.classifier[0].shape[1]

    def layers(self):
        return self.extractor + [self.classifier]

    def arrays(self):
        """Flat list [W0, b0, W1, b1, ..., Wc, bc]."""
        out = []
        for w, b in self.layers():
            out.extend((w, b))
        return out

    def is_classifier(self):
        """Per-array flag matching ``arrays()``: True for the classifier group."""
        n = 2 * len(self.extractor)
        return [False] * n + [True, True]

    def copy(self):
        return NetworkParams([(w.copy(), b.copy()) for w, b in self.extractor],
                             (self.classifier[0].copy(), self.classifier[1].copy()))

    def zeros_like(self):
        return NetworkParams([(np.zeros_like(w), np.zeros_like(b)) for w, b in self.extractor],
                             (np.zeros_like(self.classifier[0]), np.zeros_like(self.classifier[1])))

    def scaled(self, s):
        return NetworkParams([(s * w, s * b) for w, b in self.extractor],
                             (s * self.classifier[0], s * self.classifier[1]))

    def __add__(self, other):
        return from_arrays([a + b for a, b in zip(self.arrays(), other.arrays())], self)


def from_arrays(arrays, like: NetworkParams) -> NetworkParams:
    n = len(like.extractor)
    ext = [(arrays[2 * i], arrays[2 * i + 1]) for i in range(n)]
    return NetworkParams(ext, (arrays[2 * n], arrays[2 * n + 1]))


def flatten(params: NetworkParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in params.arrays()])


def unflatten(vec: np.ndarray, like: NetworkParams) -> NetworkParams:
    arrays, pos = [], 0
    for a in like.arrays():
        arrays.append(vec[pos:pos + a.size].reshape(a.shape).copy())
        pos += a.size
    return from_arrays(arrays, like)


def init_params(in_dim: int, hidden=(64, 32), num_classes: int = 2, seed=0) -> NetworkParams:
    """Glorot-uniform weights, zero biases, drawn from ``default_rng(seed)``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sizes = [in_dim, *hidden, num_classes]
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append((rng.uniform(-bound, bound, (fan_in, fan_out)), np.zeros(fan_out)))
    return NetworkParams(layers[:-1], layers[-1])


@dataclass(eq=False)
class ForwardTrace:
    inputs: np.ndarray
    activations: List[np.ndarray]  # tanh output of each extractor layer
    features: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    params_id: int = field(default=0, repr=False)


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def forward(params: NetworkParams, batch) -> ForwardTrace:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise DataError(f"batch must be (n, {params.in_dim}), got {x.shape}")
    acts = []
    h = x
    for w, b in params.extractor:
        h = np.tanh(h @ w + b)
        acts.append(h)
    wc, bc = params.classifier
    logits = h @ wc + bc
    return ForwardTrace(x, acts, h, logits, softmax(logits), id(params))


# ---------------------------------------------------------------------------
# losses on the classifier output
# ---------------------------------------------------------------------------

def _check_labels(trace, labels):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (trace.logits.shape[0],):
        raise DataError("need one label per batch row")
    if labels.size and (labels.min() < 0 or labels.max() >= trace.logits.shape[1]):
        raise DataError("label out of range")
    return labels


def nll(trace: ForwardTrace, labels) -> np.ndarray:
    """Per-sample negative log-likelihood of ``labels``."""
    labels = _check_labels(trace, labels)
    return -log_softmax(trace.logits)[np.arange(labels.size), labels]


def cross_entropy(trace: ForwardTrace, labels) -> float:
    return float(np.mean(nll(trace, labels)))


def cross_entropy_grad(trace: ForwardTrace, labels, weights=None, denom=None) -> np.ndarray:
    """d/dlogits of ``sum_i w_i * nll_i / denom`` (defaults: w=1, denom=n)."""
    labels = _check_labels(trace, labels)
    n = labels.size
    g = trace.probs.copy()
    g[np.arange(n), labels] -= 1.0
    if weights is not None:
        g *= np.asarray(weights, dtype=np.float64)[:, None]
    return g / (n if denom is None else denom)


def lsp_data_loss(trace: ForwardTrace, labels, mask, n_total=None):
    """Data term of the self-paced loss: ``sum_i v_i nll_i / n_total``.

    Returns ``(value, d_logits)``.
    """
    v = np.asarray(mask, dtype=np.float64)
    n_total = v.size if n_total is None else n_total
    value = float(np.dot(v, nll(trace, labels)) / n_total)
    return value, cross_entropy_grad(trace, labels, weights=v, denom=n_total)


def softmax_backward(probs, d_probs):
    return probs * (d_probs - np.sum(d_probs * probs, axis=1, keepdims=True))


def backward(params: NetworkParams, trace: ForwardTrace, d_features=None,
             d_probs=None, d_logits=None) -> NetworkParams:
    """Reverse pass. Upstream gradients are summed; any may be omitted."""
    if trace.inputs.shape[1] != params.in_dim or len(trace.activations) != len(params.extractor):
        raise DataError("trace was not produced by these params")
    for act, (w, _) in zip(trace.activations, params.extractor):
        if act.shape[1] != w.shape[1]:
            raise DataError("trace was not produced by these params")

    dz = np.zeros_like(trace.logits)
    if d_logits is not None:
        dz = dz + d_logits
    if d_probs is not None:
        dz = dz + softmax_backward(trace.probs, d_probs)

    wc, _ = params.classifier
    grad_c = (trace.features.T @ dz, dz.sum(axis=0))
    dh = dz @ wc.T
    if d_features is not None:
        dh = dh + d_features

    grads = []
    for i in range(len(params.extractor) - 1, -1, -1):
        w, _ = params.extractor[i]
        a = trace.activations[i]
        below = trace.activations[i - 1] if i > 0 else trace.inputs
        dpre = dh * (1.0 - a * a)
        grads.append((below.T @ dpre, dpre.sum(axis=0)))
        dh = dpre @ w.T
    grads.reverse()
    return NetworkParams(grads, grad_c)


# ---------------------------------------------------------------------------
# SGD with momentum and the annealed learning rate
# ---------------------------------------------------------------------------

def learning_rate(eta0, t, alpha=10.0, beta=0.75):
    return eta0 / (1.0 + alpha * t) ** beta


@dataclass(eq=False)
class OptimizerState:
    velocity: Optional[List[np.ndarray]] = None
    momentum: float = 0.9
    weight_decay: float = 0.0005
    eta0_extractor: float = 0.001
    eta0_classifier: float = 0.01
    alpha_sched: float = 10.0
    beta_sched: float = 0.75
    t: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("t must lie in [0, 1]")

    def rates(self):
        return (learning_rate(self.eta0_extractor, self.t, self.alpha_sched, self.beta_sched),
                learning_rate(self.eta0_classifier, self.t, self.alpha_sched, self.beta_sched))


def sgd_step(params: NetworkParams, grads: NetworkParams, state: OptimizerState):
    """One momentum step; updates ``params`` and ``state`` in place and returns both."""
    ps, gs = params.arrays(), grads.arrays()
    if len(ps) != len(gs) or any(p.shape != g.shape for p, g in zip(ps, gs)):
        raise DataError("gradient shapes do not match params")
    if state.velocity is None:
        state.velocity = [np.zeros_like(p) for p in ps]
    elif any(v.shape != p.shape for v, p in zip(state.velocity, ps)):
        raise DataError("velocity shapes do not match params")
    lr_ext, lr_cls = state.rates()
    for p, g, v, is_cls in zip(ps, gs, state.velocity, params.is_classifier()):
        v *= state.momentum
        v += g
        if state.weight_decay:
            v += state.weight_decay * p
        p -= (lr_cls if is_cls else lr_ext) * v
    return params, state


# ---------------------------------------------------------------------------
# checkpoint file: magic, layer count, shape headers, extras, float64 payload
# ---------------------------------------------------------------------------

MAGIC = b"CAUDANN1"


def save_checkpoint(path, params: NetworkParams, extras=()) -> None:
    layers = params.layers()
    extras = [np.atleast_2d(np.asarray(e, dtype=np.float64)) for e in extras]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(layers)))
        for w, _ in layers:
            fh.write(struct.pack("<II", *w.shape))
        fh.write(struct.pack("<I", len(extras)))
        for e in extras:
            fh.write(struct.pack("<II", *e.shape))
        for w, b in layers:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
        for e in extras:
            fh.write(np.ascontiguousarray(e, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns ``(params, extras)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, blob, pos)
        pos += struct.calcsize(fmt)
        return vals

    try:
        (n_layers,) = take("<I")
        shapes = [take("<II") for _ in range(n_layers)]
        (n_extra,) = take("<I")
        extra_shapes = [take("<II") for _ in range(n_extra)]
    except struct.error:
        raise DataError(f"{path}: truncated checkpoint header") from None
    if n_layers < 1:
        raise DataError(f"{path}: checkpoint has no layers")

    def array(shape):
        nonlocal pos
        count = int(np.prod(shape))
        a = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).astype(np.float64)
        pos += 8 * count
        return a.reshape(shape)

    try:
        layers = [(array(s), array((s[1],))) for s in shapes]
        extras = [array(s) for s in extra_shapes]
    except ValueError:
        raise DataError(f"{path}: truncated checkpoint") from None
    if pos != len(blob):
        raise DataError(f"{path}: trailing bytes in checkpoint")
    return NetworkParams(layers[:-1], layers[-1]), extras
