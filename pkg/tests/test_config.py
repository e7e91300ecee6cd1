"""Tests for config loading, overrides and validation gates."""

import json
from pathlib import Path

import pytest

from lattice_spde.config import RunConfig, load_config
from lattice_spde.errors import ConfigurationError, ModelError


def test_defaults():
    cfg = RunConfig()
    assert (cfg.d, cfg.n, cfg.seed) == (4, 8, 0)
    assert cfg.noise.kind == "gaussian"
    assert cfg.experiment.ladder == [4, 8, 16]
    assert cfg.kernel_theta == cfg.solver.theta
    cfg.validate()


@pytest.mark.parametrize("command", ["noise", "solve", "converge", "kernel", "holder"])
def test_defaults_pass_every_command_gate(command):
    RunConfig().validate(command)


def test_validation_samples_gate():
    with pytest.raises(ConfigurationError, match="validation_samples"):
        RunConfig.from_dict({"noise": {"validation_samples": 1}}).validate("noise")


def test_unknown_top_level_key():
    with pytest.raises(ConfigurationError, match="Unknown config keys"):
        RunConfig.from_dict({"dimension": 3})


def test_unknown_section_key():
    with pytest.raises(ConfigurationError, match="noise"):
        RunConfig.from_dict({"noise": {"sigma": 0.1}})


def test_section_must_be_mapping():
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"solver": [1, 2]})


def test_load_json_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"d": 2, "n": 6, "noise": {"kind": "riesz", "parameter": 1.0}}))
    cfg = load_config(path)
    assert cfg.grid.n == 6
    assert cfg.build_model().kind.value == "riesz"


def test_load_yaml_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("d: 1\nn: 16\nsolver:\n  lam: 0.5\n")
    cfg = load_config(path)
    assert cfg.d == 1
    assert cfg.solver.lam == 0.5
    assert cfg.solver.theta == 12.0


def test_load_errors(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "list.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigurationError):
        load_config(bad)
    assert load_config(None).d == 4


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_config(path).n == 8


def test_overrides():
    cfg = RunConfig().with_overrides(seed=5, threads=2, out=Path("runs/a"))
    assert cfg.seed == 5
    assert cfg.threads == 2
    assert cfg.out == str(Path("runs/a"))
    assert RunConfig().with_overrides().seed == 0


def test_lipschitz_gate():
    cfg = RunConfig.from_dict({"drift": {"f2_slope": 100.0}})
    with pytest.raises(ConfigurationError, match="contraction gate"):
        cfg.validate()


def test_riesz_exponent_gate():
    cfg = RunConfig.from_dict({"d": 2, "noise": {"kind": "riesz", "parameter": 2.5}})
    with pytest.raises(ModelError):
        cfg.validate()


def test_general_gates():
    for data in (
        {"seed": -1},
        {"threads": 0},
        {"noise": {"backend": "gpu"}},
        {"noise": {"scale": -1.0}},
        {"source": {"kind": "bump"}},
        {"drift": {"f1": "cubic"}},
        {"mollifier": {"order": 4}},
    ):
        with pytest.raises(ConfigurationError):
            RunConfig.from_dict(data).validate()


def test_kernel_gates():
    with pytest.raises(ConfigurationError, match="n_ref"):
        RunConfig.from_dict({"kernel": {"ns": [4, 8], "n_ref": 4}}).validate("kernel")
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"kernel": {"smoothing_eps": [0.2, 0.1]}}).validate("kernel")
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"kernel": {"eps_factors": [0.0]}}).validate("kernel")
    RunConfig.from_dict({"d": 2, "kernel": {"ns": [4]}}).validate("kernel")


def test_holder_gates():
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"d": 2, "holder": {"n": 8, "lags": [1, 2, 7]}}).validate("holder")
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"d": 2, "holder": {"samples": 0}}).validate("holder")


def test_build_plan():
    cfg = RunConfig.from_dict(
        {"d": 2, "seed": 3, "noise": {"scale": 0.5}, "experiment": {"ladder": [2, 4], "n_ref": 8, "samples": 30}}
    )
    cfg.validate("converge")
    plan = cfg.build_plan()
    assert plan.ladder == (2, 4)
    assert plan.seed == 3
    assert plan.noise_scale == 0.5
    assert plan.model.d == 2


def test_converge_gate_checks_ladder():
    cfg = RunConfig.from_dict({"d": 2, "experiment": {"ladder": [3], "n_ref": 8}})
    with pytest.raises(ConfigurationError):
        cfg.validate("converge")


def test_round_trip_through_dict():
    cfg = RunConfig.from_dict({"d": 3, "experiment": {"p_values": [1.5, 2.0]}})
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
