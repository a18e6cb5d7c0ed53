import pytest
from pydantic import ValidationError

from backeisnn.optim import lr_for_epoch
from backeisnn.run_config import (
    RunConfig,
    list_presets,
    load_config_file,
    load_preset,
    load_run_config,
    resolve_run_config,
)
from backeisnn.utils.errors import ConfigError


def test_defaults_follow_the_mnist_protocol():
    config = RunConfig()
    assert config.structure == "15C5-P2-40C5-P2-300"
    assert (config.time_steps, config.gate_kernel, config.batch_size, config.epochs) == (20, 5, 100, 200)
    assert (config.lr, config.lr_decay, config.lr_period) == (0.001, 0.1, 40)
    assert (config.v_th, config.tau, config.window) == (0.5, 2.0, 0.5)
    assert config.sfbm and config.beim
    assert lr_for_epoch(40, config.schedule()) == 0.0001
    assert config.lif_params().leak == pytest.approx(0.5)


@pytest.mark.parametrize(
    "values, message",
    [
        ({"gate_kernel": 4}, "odd"),
        ({"structure": "15X5"}, "15X5"),
        ({"dataset": "imagenet"}, "unknown dataset"),
        ({"dataset": "cifar10", "encoding": "bernoulli"}, "supports encodings"),
        ({"dataset": "nmnist", "encoding": "event", "time_steps": 120}, "event_bins"),
        ({"micro_batches": 200}, "micro_batches"),
        ({"tau": 1.0}, "tau"),
        ({"sweep_kernels": [1, 2]}, "odd"),
        ({"unknown_key": 1}, "unknown_key"),
    ],
)
def test_invalid_values(values, message):
    with pytest.raises(ValidationError, match=message):
        RunConfig.model_validate(values)


def test_yaml_round_trip(tmp_path):
    config = RunConfig(dataset="synthetic", structure="8C3-P2-64", time_steps=8, conv_padding="same")
    path = tmp_path / "config.yaml"
    path.write_text(config.to_yaml(), encoding="utf-8")
    assert load_run_config(path) == config


def test_presets_are_listed_and_valid():
    names = list_presets()
    for expected in ("mnist", "mnist_subset", "fashion_encoded", "fashion_direct", "nmnist", "nmnist30",
                     "cifar10", "gradcheck", "synthetic"):
        assert expected in names
    for name in names:
        resolve_run_config(name)


def test_unknown_preset():
    with pytest.raises(ConfigError, match="Unknown preset"):
        load_preset("imagenet")


def test_merge_order(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("time_steps: 12\nbatch_size: 25\n", encoding="utf-8")
    config = resolve_run_config(
        "synthetic",
        path,
        overrides={"batch_size": 5, "epochs": None},
        defaults={"out_dir": "elsewhere", "time_steps": 99},
    )
    assert config.dataset == "synthetic"
    assert config.time_steps == 12
    assert config.batch_size == 5
    assert config.epochs == 2
    assert config.out_dir == "elsewhere"


def test_config_file_names_its_preset(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("preset: nmnist30\nepochs: 1\n", encoding="utf-8")
    config = resolve_run_config(config_path=path)
    assert (config.dataset, config.time_steps, config.epochs) == ("nmnist", 30, 1)
    assert resolve_run_config("synthetic", path).dataset == "synthetic"


def test_bad_config_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config_file(tmp_path / "missing.yaml")
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="mapping"):
        load_config_file(listing)
    broken = tmp_path / "broken.yaml"
    broken.write_text("a: [1,\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_config_file(broken)
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    assert load_config_file(empty) == {}
