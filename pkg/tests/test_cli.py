import json

import numpy as np
import pytest

from cauda.cli import main
from cauda.datagen import load_csv

FAST = ["--set", "samples_per_class=30", "--set", "hidden=16", "--set", "pretrain_epochs=3",
        "--set", "outer_iters=2", "--set", "align_epochs=1", "--set", "n_max=2"]


def test_generate_writes_csvs(tmp_path, capsys):
    assert main(["generate", "--synthetic", "gaussian", "--out", str(tmp_path)] + FAST) == 0
    s = load_csv(tmp_path / "source.csv", labeled=True)
    t = load_csv(tmp_path / "target.csv", labeled=False)
    assert len(s) == len(t) == 120 and t.hidden_labels is not None


def test_generate_moons(tmp_path):
    assert main(["generate", "--synthetic", "moons", "--out", str(tmp_path)]) == 0
    assert len(load_csv(tmp_path / "source.csv", labeled=True)) == 400


def test_run_outputs_and_evaluate(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--out", str(out), "--seed", "3"] + FAST) == 0
    for name in ("config.txt", "metrics.jsonl", "checkpoint.bin", "confusion.csv", "summary.txt"):
        assert (out / name).is_file()
    recs = [json.loads(l) for l in (out / "metrics.jsonl").read_text().splitlines()]
    assert recs[0]["stage"] == "pretrain" and recs[-1]["stage"] == "align"
    assert "seed = 3" in (out / "config.txt").read_text()

    assert main(["generate", "--synthetic", "gaussian", "--out", str(tmp_path), "--seed", "3"]
                + FAST) == 0
    capsys.readouterr()
    ev = tmp_path / "ev"
    assert main(["evaluate", "--checkpoint", str(out / "checkpoint.bin"),
                 "--data", str(tmp_path / "target.csv"), "--out", str(ev)]) == 0
    acc = float(capsys.readouterr().out.split()[1])
    assert acc == pytest.approx(recs[-1]["target_acc"], abs=1e-4)
    assert (ev / "confusion.csv").is_file()


def test_run_from_csv_and_checkpoint(tmp_path):
    assert main(["generate", "--synthetic", "gaussian", "--out", str(tmp_path)] + FAST) == 0
    assert main(["pretrain", "--out", str(tmp_path / "pre"),
                 "--data", str(tmp_path / "source.csv"), str(tmp_path / "target.csv")] + FAST) == 0
    assert main(["run", "--out", str(tmp_path / "r"), "--checkpoint", str(tmp_path / "pre" / "checkpoint.bin"),
                 "--data", str(tmp_path / "source.csv"), str(tmp_path / "target.csv")] + FAST) == 0


def test_ablate(tmp_path, capsys):
    assert main(["ablate", "--sweep-tau", "--out", str(tmp_path)] + FAST) == 0
    table = (tmp_path / "summary.txt").read_text().splitlines()
    assert len(table) == 7 and table[2].startswith("tau=0.05")


@pytest.mark.parametrize("argv", [
    ["run", "--set", "gamma=0.5"],
    ["run", "--set", "bogus=1"],
    ["run", "--set", "novalue"],
    ["run", "--config", "/nonexistent.cfg"],
    ["run", "--data", "/nope/a.csv", "/nope/b.csv"],
    ["frobnicate"],
    [],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv and argv[0] == "run" else argv) == 2


def test_runtime_errors_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0,nan,0\n")
    good = tmp_path / "good.csv"
    good.write_text("1.0,2.0,0\n2.0,1.0,1\n")
    assert main(["run", "--out", str(tmp_path), "--data", str(bad), str(good)]) == 3
    assert main(["evaluate", "--checkpoint", str(good), "--data", str(good)]) == 3


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
