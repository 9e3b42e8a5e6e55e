"""Command line entry point.

    cauda generate --synthetic gaussian --out data/
    cauda pretrain --config run.cfg --out out/
    cauda run --config run.cfg --out out/
    cauda evaluate --checkpoint out/checkpoint.bin --data target.csv
    cauda ablate --config run.cfg --out out/ [--sweep-tau]

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import datagen, pipeline
from .config import RunConfig, apply_overrides, load_config
from .errors import ConfigError, DataError
from .model import load_checkpoint, save_checkpoint

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("cauda")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    pairs = [item.split("=", 1) for item in (args.set or [])]
    if any(len(p) != 2 for p in pairs):
        raise ConfigError("--set expects key=value")
    cfg = apply_overrides(cfg, pairs)
    if getattr(args, "data", None):
        cfg = cfg.replace(data="csv", source_csv=args.data[0], target_csv=args.data[1])
    if getattr(args, "synthetic", None):
        cfg = cfg.replace(data=args.synthetic)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg.validate()


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args):
    cfg = _config(args)
    if cfg.data == "csv":
        raise ConfigError("generate needs --synthetic gaussian|moons")
    source, target = pipeline.load_data(cfg)
    out = _out(args)
    datagen.write_csv(out / "source.csv", source)
    datagen.write_csv(out / "target.csv", target)
    print(f"wrote {len(source)} source and {len(target)} target rows to {out}")


def cmd_pretrain(args):
    cfg = _config(args)
    source, target = pipeline.load_data(cfg)
    params = pipeline.pretrain(cfg, source)
    out = _out(args)
    save_checkpoint(out / "checkpoint.bin", params)
    src = pipeline.evaluate(params, source)
    line = f"source accuracy {src.accuracy:.4f}"
    if target.hidden_labels is not None:
        line += f"  target accuracy {pipeline.evaluate(params, target).accuracy:.4f}"
    print(line)


def cmd_run(args):
    cfg = _config(args)
    out = _out(args)
    data = pipeline.load_data(cfg)
    pre = None
    if args.checkpoint:
        pre, _ = load_checkpoint(args.checkpoint)
    (out / "config.txt").write_text(cfg.to_text())
    with open(out / "metrics.jsonl", "w") as sink:
        result = pipeline.run(cfg, data, pre, metrics_sink=sink)
    pipeline.write_outputs(out, result)
    print((out / "summary.txt").read_text(), end="")


def cmd_evaluate(args):
    params, _ = load_checkpoint(args.checkpoint)
    data = datagen.load_csv(args.data, labeled=args.labeled)
    ev = pipeline.evaluate(params, data)
    print(f"accuracy {ev.accuracy:.4f}")
    if args.out:
        out = _out(args)
        pipeline.write_confusion(out / "confusion.csv", ev.confusion)
        with open(out / "metrics.jsonl", "a") as fh:
            fh.write(pipeline.MetricsRecord(0, "evaluate", target_acc=ev.accuracy,
                                            confusion=ev.confusion.tolist()).to_json() + "\n")


def cmd_ablate(args):
    cfg = _config(args)
    out = _out(args)
    results = pipeline.ablate(cfg, sweep_tau=args.sweep_tau)
    rows = [pipeline.summarize(name, r) for name, r in results.items()]
    table = pipeline.format_table(rows)
    (out / "summary.txt").write_text(table)
    with open(out / "metrics.jsonl", "w") as fh:
        for name, r in results.items():
            for rec in r.records:
                rec.extra = {"variant": name, **rec.extra}
                fh.write(rec.to_json() + "\n")
    print(table, end="")


def build_parser():
    p = argparse.ArgumentParser(prog="cauda", description="Class-aware domain adaptation on feature vectors.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default="out")
        if data:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--data", nargs=2, metavar=("SOURCE_CSV", "TARGET_CSV"))
            g.add_argument("--synthetic", choices=("gaussian", "moons"))

    common(sub.add_parser("generate", help="write synthetic source/target CSVs"))
    common(sub.add_parser("pretrain", help="supervised source pre-training"))
    sp = sub.add_parser("run", help="full adaptation run")
    common(sp)
    sp.add_argument("--checkpoint", help="start from this pre-trained checkpoint")
    sp = sub.add_parser("evaluate", help="accuracy and confusion matrix of a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True, help="CSV with labels")
    sp.add_argument("--labeled", action="store_true", help="treat the CSV as a labeled set")
    sp.add_argument("--out")
    sp = sub.add_parser("ablate", help="ablation matrix or tau sweep")
    common(sp)
    sp.add_argument("--sweep-tau", action="store_true")
    return p


COMMANDS = {"generate": cmd_generate, "pretrain": cmd_pretrain, "run": cmd_run,
            "evaluate": cmd_evaluate, "ablate": cmd_ablate}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
