"""Run directory layout: config, run info, metrics, confusion matrices, checkpoints."""

from __future__ import annotations

import datetime as dt
import platform
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from backeisnn import __version__
from backeisnn.run_config import RunConfig
from backeisnn.utils.io import append_csv_row, read_csv, write_csv
from backeisnn.utils.serialization import to_plain


METRICS_FILE = "metrics.csv"
BASE_METRICS = ("epoch", "split", "loss", "accuracy", "lr", "wall_time")


@dataclass
class RunDirectory:
    path: Path

    @classmethod
    def create(cls, path: str | Path, config: RunConfig, command: str = "train") -> "RunDirectory":
        run = cls(Path(path))
        run.path.mkdir(parents=True, exist_ok=True)
        (run.path / "config.yaml").write_text(config.to_yaml(), encoding="utf-8")
        info = {
            "command": command,
            "seed": config.seed,
            "version": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        }
        (run.path / "run.yaml").write_text(yaml.safe_dump(info, sort_keys=False), encoding="utf-8")
        return run

    @property
    def config_path(self) -> Path:
        return self.path / "config.yaml"

    @property
    def metrics_path(self) -> Path:
        return self.path / METRICS_FILE

    @property
    def last_checkpoint(self) -> Path:
        return self.path / "last.ckpt"

    @property
    def best_checkpoint(self) -> Path:
        return self.path / "best.ckpt"

    def append_metrics(self, row: dict[str, Any], layer_names: list[str]) -> None:
        headers = list(BASE_METRICS) + [f"rate_{n}" for n in layer_names]
        append_csv_row(headers, [_cell(row.get(h)) for h in headers], self.metrics_path)

    def read_metrics(self) -> list[dict[str, str]]:
        if not self.metrics_path.exists():
            return []
        return read_csv(self.metrics_path)

    def truncate_metrics(self, epochs_done: int) -> None:
        """Drop rows past ``epochs_done`` (left behind by an interrupted run before resume)."""
        rows = self.read_metrics()
        if not rows:
            return
        kept = [r for r in rows if int(r["epoch"]) <= epochs_done]
        headers = list(rows[0].keys())
        write_csv(headers, [[r[h] for h in headers] for r in kept], self.metrics_path)

    def write_confusion(self, split: str, matrix: np.ndarray) -> Path:
        path = self.path / f"confusion_{split}.csv"
        write_csv(None, matrix.astype(np.int64).tolist(), path)
        return path

    def write_yaml(self, name: str, data: Any) -> Path:
        path = self.path / name
        path.write_text(yaml.safe_dump(to_plain(data), sort_keys=False, allow_unicode=True), encoding="utf-8")
        return path


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def run_dir_name(config: RunConfig, label: str | None = None) -> str:
    parts = [config.dataset, label or "run", f"seed{config.seed}"]
    return "-".join(parts)
