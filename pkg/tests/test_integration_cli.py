import json
import os
from pathlib import Path

import pytest
from typer.testing import CliRunner

from backeisnn.cli import app
from backeisnn.data.idx import SPLIT_COUNTS
from backeisnn.data.loader import load_split


runner = CliRunner()

SPLIT_SIZES = {
    "mnist": (SPLIT_COUNTS["train"], SPLIT_COUNTS["test"]),
    "fashion": (SPLIT_COUNTS["train"], SPLIT_COUNTS["test"]),
    "cifar10": (50_000, 10_000),
    "nmnist": (60_000, 10_000),
}


def _data_root() -> str:
    root = os.getenv("BACKEISNN_DATA_ROOT")
    if not root:
        pytest.skip("Missing env var: BACKEISNN_DATA_ROOT")
    return root


def _require_dataset(root: str, name: str) -> None:
    directory = {"fashion": "fashion-mnist"}.get(name, name)
    if not (Path(root) / directory).is_dir():
        pytest.skip(f"{name} not found under {root}")


@pytest.mark.integration
@pytest.mark.parametrize("name", sorted(SPLIT_SIZES))
def test_dataset_split_sizes(name):
    root = _data_root()
    _require_dataset(root, name)
    train, test = SPLIT_SIZES[name]
    assert len(load_split(name, "train", root)) == train
    assert len(load_split(name, "test", root)) == test


@pytest.mark.integration
def test_mnist_first_test_label():
    root = _data_root()
    _require_dataset(root, "mnist")
    data = load_split("mnist", "test", root, limit=1)
    assert int(data.labels[0]) == 7
    assert data.images.shape == (1, 1, 28, 28)


@pytest.mark.integration
def test_mnist_short_run():
    root = _data_root()
    _require_dataset(root, "mnist")
    with runner.isolated_filesystem():
        result = runner.invoke(
            app,
            ["--data-root", root, "train", "--preset", "mnist_subset", "--epochs", "1", "--train-limit", "500",
             "--test-limit", "200", "--run-dir", "run"],
        )
        assert result.exit_code == 0, result.output
        assert Path("run", "best.ckpt").is_file()


@pytest.mark.slow
def test_synthetic_train_then_eval():
    with runner.isolated_filesystem():
        result = runner.invoke(
            app,
            ["train", "--preset", "synthetic", "--epochs", "1", "--train-limit", "40", "--test-limit", "20",
             "--batch-size", "20", "--run-dir", "run"],
        )
        assert result.exit_code == 0, result.output
        assert "best test accuracy" in result.output.lower()
        for name in ("metrics.csv", "best.ckpt", "last.ckpt", "confusion_test.csv"):
            assert Path("run", name).is_file()

        result = runner.invoke(app, ["eval", "run", "--split", "both", "--format", "json", "--output", "report.json"])
        assert result.exit_code == 0, result.output
        report = json.loads(Path("report.json").read_text(encoding="utf-8"))
        assert report["epoch"] == 1
        assert report["test"]["samples"] == 20
        assert report["train"]["samples"] == 40
        assert Path("run", "confusion_train.csv").is_file()
