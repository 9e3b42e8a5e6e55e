"""Run configuration and its ``key = value`` file format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError


@dataclass
class RunConfig:
    # data
    data: str = "gaussian"  # gaussian | moons | csv
    source_csv: Optional[str] = None
    target_csv: Optional[str] = None
    num_classes: int = 4
    dim: int = 2
    rotation_deg: float = 30.0
    translation: float = 0.0
    class_sep: float = 3.5
    noise_std: float = 1.0
    samples_per_class: int = 200
    moons_noise: float = 0.1
    n_source: int = 400
    n_target: int = 400

    # network and optimiser
    hidden: str = "64,32"
    eta0_extractor: float = 0.001
    eta0_classifier: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0005
    sched_alpha: float = 10.0
    sched_beta: float = 0.75
    batch_size: int = 32
    pretrain_epochs: int = 30

    # k-means / centroid memory
    kmeans_max_iters: int = 100
    kmeans_tol: float = 1e-6
    centroid_alpha: float = 1.0

    # self-paced refinement
    lam: float = 0.1
    gamma: float = 1.3
    n_max: int = 20
    aux_batch_size: int = 32

    # class-aware alignment
    tau1: float = 0.3
    tau2: float = 0.3
    k_b: int = 0  # 0 -> min(num_classes, 4)
    n_source_per_class: int = 8
    n_target_per_class: int = 8
    kernel_mode: str = "class_median"
    kernel_sigma: float = 1.0
    outer_iters: int = 20
    align_epochs: int = 5
    steps_per_epoch: int = 0  # 0 -> one pass over the source set

    seed: int = 7

    # ablations
    no_refinement: bool = False
    no_confidence_check: bool = False
    pseudo_source: str = "oa"  # oa | net
    loss: str = "da"  # da | c2c | p2p | ce_hard

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.data in ("gaussian", "moons", "csv"), f"unknown data source {self.data!r}")
        if self.data == "csv":
            need(self.source_csv and self.target_csv, "csv data needs source_csv and target_csv")
            for p in (self.source_csv, self.target_csv):
                need(Path(p).is_file(), f"file not found: {p}")
        need(self.num_classes >= 2, "num_classes must be >= 2")
        need(self.dim >= 2, "dim must be >= 2")
        need(self.class_sep > 0, "class_sep must be > 0")
        need(self.noise_std >= 0 and self.moons_noise >= 0, "noise must be >= 0")
        need(self.samples_per_class >= 1, "samples_per_class must be >= 1")
        need(self.n_source >= 2 and self.n_target >= 2, "n_source and n_target must be >= 2")
        self.hidden_sizes()
        need(self.eta0_extractor >= 0 and self.eta0_classifier >= 0, "learning rates must be >= 0")
        need(0 <= self.momentum < 1, "momentum must lie in [0, 1)")
        need(self.weight_decay >= 0, "weight_decay must be >= 0")
        need(self.batch_size >= 1 and self.aux_batch_size >= 1, "batch sizes must be >= 1")
        need(self.pretrain_epochs >= 0, "pretrain_epochs must be >= 0")
        need(self.kmeans_max_iters >= 1 and self.kmeans_tol >= 0, "bad k-means settings")
        need(self.centroid_alpha >= 0, "centroid_alpha must be >= 0")
        need(self.lam > 0, "lam must be > 0")
        need(self.gamma > 1, "gamma must be > 1")
        need(self.n_max >= 0, "n_max must be >= 0")
        need(self.tau1 >= 0 and self.tau2 >= 0, "tau1 and tau2 must be >= 0")
        need(self.k_b >= 0, "k_b must be >= 0")
        need(self.n_source_per_class >= 1 and self.n_target_per_class >= 1,
             "per-class batch counts must be >= 1")
        need(self.kernel_mode in ("median", "class_median", "fixed"), f"unknown kernel_mode {self.kernel_mode!r}")
        need(self.kernel_sigma > 0, "kernel_sigma must be > 0")
        need(self.outer_iters >= 0 and self.align_epochs >= 0 and self.steps_per_epoch >= 0,
             "iteration counts must be >= 0")
        need(self.pseudo_source in ("oa", "net"), f"unknown pseudo_source {self.pseudo_source!r}")
        need(self.loss in ("da", "c2c", "p2p", "ce_hard"), f"unknown loss {self.loss!r}")
        return self

    def hidden_sizes(self):
        try:
            sizes = tuple(int(s) for s in str(self.hidden).split(",") if s.strip())
        except ValueError:
            raise ConfigError(f"hidden must be comma-separated integers, got {self.hidden!r}") from None
        if any(s < 1 for s in sizes):
            raise ConfigError("hidden sizes must be positive")
        return sizes

    def effective_k_b(self, num_classes):
        return self.k_b if self.k_b > 0 else min(num_classes, 4)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(name, kind, raw):
    kind = str(kind)
    try:
        if kind == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None
    if raw.lower() in ("none", ""):
        return None
    return raw


def apply_overrides(config: RunConfig, pairs) -> RunConfig:
    known = {f.name: f.type for f in fields(RunConfig)}
    changes = {}
    for key, raw in pairs:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        changes[key] = _coerce(key, known[key], raw.strip())
    return dataclasses.replace(config, **changes)


def parse_config_text(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    pairs = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value))
    return apply_overrides(base or RunConfig(), pairs)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)
