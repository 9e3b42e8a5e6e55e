import pytest

from cauda.config import RunConfig, apply_overrides, load_config, parse_config_text
from cauda.errors import ConfigError


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert (cfg.momentum, cfg.weight_decay, cfg.lam, cfg.gamma) == (0.9, 0.0005, 0.1, 1.3)
    assert (cfg.tau1, cfg.tau2, cfg.centroid_alpha) == (0.3, 0.3, 1.0)
    assert (cfg.eta0_extractor, cfg.eta0_classifier) == (0.001, 0.01)
    assert (cfg.sched_alpha, cfg.sched_beta) == (10.0, 0.75)
    assert cfg.effective_k_b(10) == 4 and cfg.effective_k_b(3) == 3


def test_parse_text_with_comments():
    cfg = parse_config_text("# comment\ntau1 = 0.5  # trailing\nno_refinement = yes\nhidden = 8,4\n")
    assert cfg.tau1 == 0.5 and cfg.no_refinement is True and cfg.hidden_sizes() == (8, 4)


def test_round_trip_text():
    cfg = RunConfig(tau2=0.7, loss="c2c", no_confidence_check=True)
    assert parse_config_text(cfg.to_text()) == cfg


@pytest.mark.parametrize("text", ["tau1 0.3", "nope = 1", "n_max = x", "no_refinement = maybe"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize("field,value", [("gamma", 1.0), ("lam", 0.0), ("momentum", 1.0),
                                         ("tau1", -0.1), ("loss", "l1"), ("kernel_mode", "x"),
                                         ("hidden", "4,a"), ("data", "mnist")])
def test_validate_ranges(field, value):
    with pytest.raises(ConfigError):
        RunConfig(**{field: value}).validate()


def test_csv_paths_must_exist(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        RunConfig(data="csv", source_csv=str(tmp_path / "a"), target_csv=str(tmp_path / "b")).validate()


def test_load_config_missing(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.cfg")


def test_apply_overrides():
    cfg = apply_overrides(RunConfig(), [("seed", "3"), ("source_csv", "none")])
    assert cfg.seed == 3 and cfg.source_csv is None
