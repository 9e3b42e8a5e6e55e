"""The alternating adaptation loop, evaluation, and metrics bookkeeping.

One outer iteration runs three stages on top of a source-pretrained network:

* ``assign``: embed both domains, k-means on the target seeded from the
  source centroids (first iteration) or the centroid memory (afterwards),
  moving-average the memory, Hungarian-match it to the source centroids and
  emit pseudo-labels.
* ``refine``: self-paced training of the target-only auxiliary network and
  the confidence filter that yields the filtered target set.
* ``align``: class-aware batches and SGD on the combined loss.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import datagen
from .alignment import KernelSpec, sample_class_batch, total_loss
from .assignment import assign_pseudolabels, build_cost, hungarian, nearest_source_labels
from .clustering import kmeans, moving_average_update, source_centroids
from .config import RunConfig
from .errors import DataError, StageError
from .model import (NetworkParams, OptimizerState, backward, cross_entropy_grad, forward,
                    init_params, save_checkpoint, sgd_step)
from .refinement import SelfPacedSchedule, confidence_check, refine, unfiltered

log = logging.getLogger(__name__)

# independent random streams derived from the run seed
STREAM_INIT, STREAM_PRETRAIN, STREAM_AUX_INIT, STREAM_AUX, STREAM_ALIGN = range(1, 6)


def stream(seed, which):
    return np.random.default_rng([seed, which])


@dataclass
class MetricsRecord:
    epoch: int
    stage: str
    source_acc: Optional[float] = None
    target_acc: Optional[float] = None
    pseudo_acc: Optional[float] = None
    pseudo_acc_filtered: Optional[float] = None
    n_filtered: Optional[int] = None
    losses: Dict[str, float] = field(default_factory=dict)
    confusion: Optional[List[List[int]]] = None
    extra: Dict[str, object] = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), separators=(",", ":"))


@dataclass(eq=False)
class Evaluation:
    accuracy: float
    confusion: np.ndarray
    predictions: np.ndarray


def confusion_matrix(true, pred, k):
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (np.asarray(true), np.asarray(pred)), 1)
    return cm


def evaluate(params: NetworkParams, data) -> Evaluation:
    """Argmax accuracy and confusion matrix (rows: true class, cols: predicted)."""
    labels = data.labels if isinstance(data, datagen.LabeledSet) else data.hidden_labels
    if labels is None:
        raise DataError("evaluation needs hidden labels")
    probs = forward(params, data.features).probs
    pred = np.argmax(probs, axis=1)
    k = max(params.num_classes, int(labels.max()) + 1)
    return Evaluation(float(np.mean(pred == labels)), confusion_matrix(labels, pred, k), pred)


def label_accuracy(pred, truth):
    if truth is None or len(pred) == 0:
        return None
    return float(np.mean(np.asarray(pred) == np.asarray(truth)))


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

def load_data(config: RunConfig):
    if config.data == "gaussian":
        spec = datagen.ShiftSpec(config.rotation_deg, [config.translation], config.class_sep,
                                 config.noise_std, config.samples_per_class, config.samples_per_class)
        return datagen.generate_gaussian_pair(spec, config.num_classes, config.dim, config.seed)
    if config.data == "moons":
        return datagen.generate_two_moons_pair(config.moons_noise, config.rotation_deg,
                                               config.n_source, config.n_target, config.seed)
    source = datagen.load_csv(config.source_csv, labeled=True)
    target = datagen.load_csv(config.target_csv, labeled=False)
    if source.dim != target.dim:
        raise DataError("source and target feature dimensions differ")
    return source, target


def _optimizer(config: RunConfig):
    return OptimizerState(None, config.momentum, config.weight_decay, config.eta0_extractor,
                          config.eta0_classifier, config.sched_alpha, config.sched_beta, 0.0)


# ---------------------------------------------------------------------------
# stage 1: supervised source pre-training
# ---------------------------------------------------------------------------

def pretrain(config: RunConfig, source: datagen.LabeledSet) -> NetworkParams:
    params = init_params(source.dim, config.hidden_sizes(), source.num_classes,
                         stream(config.seed, STREAM_INIT))
    rng = stream(config.seed, STREAM_PRETRAIN)
    opt = _optimizer(config)
    n = len(source)
    per_epoch = math.ceil(n / config.batch_size)
    total = config.pretrain_epochs * per_epoch
    step = 0
    for _ in range(config.pretrain_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            opt.t = step / max(total - 1, 1)
            trace = forward(params, source.features[idx])
            grads = backward(params, trace, d_logits=cross_entropy_grad(trace, source.labels[idx]))
            sgd_step(params, grads, opt)
            step += 1
    return params


# ---------------------------------------------------------------------------
# stages 2-4
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RunResult:
    records: List[MetricsRecord]
    params: NetworkParams
    source_only: Evaluation
    final: Evaluation
    centroids: Optional[np.ndarray] = None
    source_centroids: Optional[np.ndarray] = None

    def last(self, stage):
        for r in reversed(self.records):
            if r.stage == stage:
                return r
        return None


class _Recorder:
    def __init__(self, sink=None):
        self.records = []
        self.sink = sink

    def add(self, record):
        self.records.append(record)
        if self.sink is not None:
            self.sink.write(record.to_json() + "\n")
            self.sink.flush()


def run(config: RunConfig, data=None, pretrained: Optional[NetworkParams] = None,
        metrics_sink=None) -> RunResult:
    """Full adaptation run. ``data`` and ``pretrained`` skip regeneration / pre-training."""
    config.validate()
    source, target = data if data is not None else load_data(config)
    k = source.num_classes
    rec = _Recorder(metrics_sink)

    def stage(name, fn):
        try:
            return fn()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc

    if pretrained is None:
        params = stage("pretrain", lambda: pretrain(config, source))
    else:
        params = pretrained.copy()
    src_eval = evaluate(params, source)
    base = evaluate(params, target) if target.hidden_labels is not None else None
    rec.add(MetricsRecord(0, "pretrain", src_eval.accuracy, base and base.accuracy,
                          confusion=base and base.confusion.tolist()))

    truth = target.hidden_labels
    k_b = config.effective_k_b(k)
    steps = config.steps_per_epoch or math.ceil(len(source) / (k_b * config.n_source_per_class))
    total_steps = config.outer_iters * config.align_epochs * steps
    opt = _optimizer(config)
    aux = None
    aux_opt = _optimizer(config)
    aux_rng = stream(config.seed, STREAM_AUX)
    align_rng = stream(config.seed, STREAM_ALIGN)
    feature_kernel = KernelSpec(config.kernel_mode, config.kernel_sigma)
    prob_kernel = KernelSpec(config.kernel_mode, config.kernel_sigma)
    cache = None
    cs = None
    step = 0

    for it in range(1, config.outer_iters + 1):
        # -- optimal assignment ------------------------------------------------
        def assign_stage():
            nonlocal cache
            fs = forward(params, source.features).features
            tt = forward(params, target.features)
            cs_ = source_centroids(fs, source.labels, k)
            km, cluster_of = kmeans(tt.features, cs_ if cache is None else cache,
                                    config.kmeans_max_iters, config.kmeans_tol)
            if cache is None:
                cache = km
            else:
                cache = moving_average_update(cache, tt.features, cluster_of, config.centroid_alpha)
            match = hungarian(build_cost(cs_, cache))
            pseudo = assign_pseudolabels(cluster_of, match)
            oa_labels = pseudo.labels
            if config.pseudo_source == "net":
                labels = np.argmax(tt.probs, axis=1)
            else:
                labels = oa_labels
            rec.add(MetricsRecord(it, "assign", pseudo_acc=label_accuracy(labels, truth),
                                  losses={"assignment_cost": match.total_cost},
                                  extra={"perm": match.perm.tolist(),
                                         "kmeans_iters": km.iterations,
                                         "oa_pseudo_acc": label_accuracy(oa_labels, truth),
                                         "net_pseudo_acc": label_accuracy(np.argmax(tt.probs, 1), truth),
                                         "nearest_pseudo_acc": label_accuracy(
                                             nearest_source_labels(tt.features, cs_), truth)}))
            return cs_, labels

        cs, labels = stage("assign", assign_stage)

        # -- pseudo-label refinement ---------------------------------------------
        def refine_stage():
            nonlocal aux
            if config.no_refinement:
                return unfiltered(target, labels), []
            if aux is None:
                aux = init_params(target.dim, config.hidden_sizes(), k,
                                  stream(config.seed, STREAM_AUX_INIT))
            aux_opt.t = (it - 1) / max(config.outer_iters - 1, 1)
            epochs = []
            sched = SelfPacedSchedule(config.lam, config.gamma, 0, config.n_max)
            refine(aux, target.features, labels, sched, aux_opt, config.aux_batch_size,
                   aux_rng, epochs)
            if config.no_confidence_check:
                return unfiltered(target, labels), epochs
            return confidence_check(aux, target.features, labels, config.lam), epochs

        filtered, epochs = stage("refine", refine_stage)
        filt_truth = truth[filtered.indices] if truth is not None else None
        rec.add(MetricsRecord(it, "refine", pseudo_acc=label_accuracy(labels, truth),
                              pseudo_acc_filtered=label_accuracy(filtered.pseudo_labels, filt_truth),
                              n_filtered=len(filtered), extra={"self_paced": epochs}))

        # -- class-aware alignment -----------------------------------------------
        def align_stage():
            nonlocal step
            sums = {"total": 0.0, "ce": 0.0, "c2c": 0.0, "p2p": 0.0, "ce_target": 0.0}
            done = 0
            if not np.intersect1d(source.labels, filtered.pseudo_labels).size:
                log.warning("iteration %d: filtered target shares no class with the source; "
                            "alignment skipped", it)
                step += config.align_epochs * steps
                return {}, 0
            for _ in range(config.align_epochs):
                for _ in range(steps):
                    opt.t = min(step / max(total_steps - 1, 1), 1.0)
                    step += 1
                    batch = sample_class_batch(source, filtered, k_b, config.n_source_per_class,
                                               config.n_target_per_class, align_rng)
                    if batch is None:
                        continue
                    value, parts, grads = total_loss(params, batch, config.tau1, config.tau2,
                                                     feature_kernel, prob_kernel, config.loss)
                    sgd_step(params, grads, opt)
                    sums["total"] += value
                    for key, v in parts.items():
                        sums[key] += v
                    done += 1
            return {key: v / done for key, v in sums.items()} if done else {}, done

        losses, done = stage("align", align_stage)
        s_eval = evaluate(params, source)
        t_eval = evaluate(params, target) if truth is not None else None
        rec.add(MetricsRecord(it, "align", s_eval.accuracy, t_eval and t_eval.accuracy,
                              losses=losses, confusion=t_eval and t_eval.confusion.tolist(),
                              extra={"steps": done}))

    final = evaluate(params, target) if truth is not None else None
    return RunResult(rec.records, params, base, final,
                     cache.centroids if cache is not None else None,
                     cs.centroids if cs is not None else None)


# ---------------------------------------------------------------------------
# ablations
# ---------------------------------------------------------------------------

ABLATIONS = {
    "full": {},
    "no_refinement": {"no_refinement": True},
    "no_confidence_check": {"no_confidence_check": True},
    "pseudo_net": {"pseudo_source": "net"},
    "loss_c2c": {"loss": "c2c"},
    "loss_p2p": {"loss": "p2p"},
    "loss_ce_hard": {"loss": "ce_hard"},
}

TAU_GRID = (0.05, 0.1, 0.3, 0.6, 1.0)


@dataclass
class SummaryRow:
    name: str
    target_acc: Optional[float]
    source_only_acc: Optional[float]
    pseudo_acc: Optional[float]
    pseudo_acc_filtered: Optional[float]
    n_filtered: Optional[int]


def summarize(name, result: RunResult) -> SummaryRow:
    refine_rec = result.last("refine")
    return SummaryRow(name, result.final and result.final.accuracy,
                      result.source_only and result.source_only.accuracy,
                      refine_rec.pseudo_acc if refine_rec else None,
                      refine_rec.pseudo_acc_filtered if refine_rec else None,
                      refine_rec.n_filtered if refine_rec else None)


def ablate(config: RunConfig, variants=None, sweep_tau=False, data=None):
    """Run a set of configurations sharing data and pre-training.

    Returns ``{name: RunResult}``; with ``sweep_tau`` the variants are
    ``tau=<value>`` with ``tau1 = tau2 = value``.
    """
    config.validate()
    data = data if data is not None else load_data(config)
    pre = pretrain(config, data[0])
    if sweep_tau:
        plan = {f"tau={t:g}": {"tau1": t, "tau2": t} for t in TAU_GRID}
    else:
        plan = {name: ABLATIONS[name] for name in (variants or ABLATIONS)}
    return {name: run(config.replace(**changes), data, pre) for name, changes in plan.items()}


def format_table(rows: List[SummaryRow]) -> str:
    def pct(v):
        return "   -  " if v is None else f"{100 * v:6.2f}"

    head = f"{'variant':<22}{'target':>8}{'src-only':>10}{'pl(D_T)':>9}{'pl(D*_T)':>10}{'|D*_T|':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        nf = "-" if r.n_filtered is None else str(r.n_filtered)
        lines.append(f"{r.name:<22}{pct(r.target_acc):>8}{pct(r.source_only_acc):>10}"
                     f"{pct(r.pseudo_acc):>9}{pct(r.pseudo_acc_filtered):>10}{nf:>8}")
    return "\n".join(lines) + "\n"


def write_outputs(out_dir, result: RunResult, name="run"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    extras = [c for c in (result.source_centroids, result.centroids) if c is not None]
    save_checkpoint(out / "checkpoint.bin", result.params, extras)
    if result.final is not None:
        write_confusion(out / "confusion.csv", result.final.confusion)
    (out / "summary.txt").write_text(format_table([summarize(name, result)]))


def write_confusion(path, cm):
    with open(path, "w") as fh:
        fh.write("true\\pred," + ",".join(str(j) for j in range(cm.shape[1])) + "\n")
        for i, row in enumerate(cm):
            fh.write(f"{i}," + ",".join(str(int(v)) for v in row) + "\n")
