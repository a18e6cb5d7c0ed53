"""Single runs, the four-way mechanism ablation and the kernel / simulation-length sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from backeisnn.data.loader import Dataset
from backeisnn.run_config import RunConfig, load_run_config
from backeisnn.services.runs import RunDirectory, run_dir_name
from backeisnn.services.trainer import FitResult, Trainer
from backeisnn.utils.errors import ConfigError
from backeisnn.utils.io import write_csv


logger = logging.getLogger("backeisnn.experiments")

ABLATION_ROWS: tuple[tuple[str, bool, bool], ...] = (
    ("baseline", False, False),
    ("sfbm", True, False),
    ("beim", False, True),
    ("both", True, True),
)
SWEEP_AXES = {"kernel": "gate_kernel", "time": "time_steps"}


def with_values(config: RunConfig, **values: Any) -> RunConfig:
    """A re-validated copy with ``values`` replaced."""
    return RunConfig.model_validate({**config.model_dump(), **values})


def run_training(
    config: RunConfig,
    *,
    data_root: str | Path | None = None,
    run_path: str | Path | None = None,
    label: str = "run",
    datasets: dict[str, Dataset] | None = None,
    command: str = "train",
) -> FitResult:
    path = Path(run_path) if run_path else Path(config.out_dir) / run_dir_name(config, label)
    run = RunDirectory.create(path, config, command=command)
    datasets = datasets or {}
    trainer = Trainer(
        config,
        data_root=data_root,
        train_set=datasets.get("train"),
        test_set=datasets.get("test"),
        run=run,
    )
    logger.info("run_start path=%s structure=%s epochs=%d", path, config.structure, config.epochs)
    return trainer.fit()


def resume_training(
    run_path: str | Path,
    *,
    data_root: str | Path | None = None,
    epochs: int | None = None,
    datasets: dict[str, Dataset] | None = None,
) -> FitResult:
    """Continue the run in ``run_path`` from its last checkpoint, optionally extending ``epochs``."""
    run = RunDirectory(Path(run_path))
    if not run.last_checkpoint.is_file():
        raise ConfigError(f"nothing to resume: {run.last_checkpoint} does not exist")
    config = load_run_config(run.config_path)
    if epochs is not None and epochs != config.epochs:
        config = with_values(config, epochs=epochs)
        run.config_path.write_text(config.to_yaml(), encoding="utf-8")
    datasets = datasets or {}
    trainer = Trainer(
        config,
        data_root=data_root,
        train_set=datasets.get("train"),
        test_set=datasets.get("test"),
        run=run,
    )
    trainer.resume_from(run.last_checkpoint)
    return trainer.fit()


@dataclass
class PointSummary:
    label: str
    values: dict[str, Any]
    accuracies: list[float] = field(default_factory=list)
    mechanisms: list[dict[str, dict]] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else 0.0

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies, ddof=1)) if len(self.accuracies) > 1 else 0.0

    @property
    def best(self) -> float:
        return max(self.accuracies) if self.accuracies else 0.0

    def row(self) -> dict[str, Any]:
        return {"setting": self.label, **self.values, "runs": len(self.accuracies), "mean": self.mean, "std": self.std, "best": self.best}


def _repeat(
    points: list[tuple[str, dict[str, Any]]],
    config: RunConfig,
    repeats: int,
    out_dir: Path,
    run_one: Callable[[RunConfig, Path], FitResult],
) -> list[PointSummary]:
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    summaries = []
    for label, values in points:
        summary = PointSummary(label, values)
        for offset in range(repeats):
            point_config = with_values(config, seed=config.seed + offset, **values)
            result = run_one(point_config, out_dir / run_dir_name(point_config, label))
            summary.accuracies.append(result.best_accuracy)
            summary.mechanisms.append(result.mechanism_summary())
            logger.info("point_done setting=%s seed=%d best_acc=%.4f", label, point_config.seed, result.best_accuracy)
        summaries.append(summary)
    return summaries


def _write_summary(path: Path, summaries: list[PointSummary]) -> Path:
    rows = [s.row() for s in summaries]
    headers = list(rows[0].keys())
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(headers, [[r[h] for h in headers] for r in rows], path)
    return path


def run_ablation(
    config: RunConfig,
    *,
    repeats: int = 1,
    data_root: str | Path | None = None,
    datasets: dict[str, Dataset] | None = None,
) -> tuple[list[PointSummary], Path]:
    """Baseline, +SFBM, +BEIM and both, each with the same seeds and therefore the same data order."""
    out_dir = Path(config.out_dir) / f"ablation-{config.dataset}-seed{config.seed}"
    points = [(label, {"sfbm": sfbm, "beim": beim}) for label, sfbm, beim in ABLATION_ROWS]

    def run_one(point_config: RunConfig, path: Path) -> FitResult:
        return run_training(point_config, data_root=data_root, run_path=path, datasets=datasets, command="ablate")

    summaries = _repeat(points, config, repeats, out_dir, run_one)
    return summaries, _write_summary(out_dir / "ablation.csv", summaries)


def run_sweep(
    config: RunConfig,
    axis: str,
    *,
    values: list[int] | None = None,
    repeats: int = 1,
    data_root: str | Path | None = None,
    datasets: dict[str, Dataset] | None = None,
) -> tuple[list[PointSummary], Path]:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
    key = SWEEP_AXES[axis]
    if values is None:
        values = config.sweep_kernels if axis == "kernel" else config.sweep_time_steps
    prefix = "kernel" if axis == "kernel" else "T"
    points = [(f"{prefix}{v}", {key: v}) for v in values]
    out_dir = Path(config.out_dir) / f"sweep-{axis}-{config.dataset}-seed{config.seed}"

    def run_one(point_config: RunConfig, path: Path) -> FitResult:
        return run_training(point_config, data_root=data_root, run_path=path, datasets=datasets, command="sweep")

    summaries = _repeat(points, config, repeats, out_dir, run_one)
    return summaries, _write_summary(out_dir / "sweep.csv", summaries)


def mechanism_check(summary: PointSummary, min_fraction: float = 0.01, min_sfb_std: float = 0.01) -> dict[str, Any]:
    """
    Whether the gates of a run are doing something: with BEIM on, both spike
    signs occur (each at least ``min_fraction`` of nonzero spikes) in some
    gated layer; with SFBM on, some layer's gate values spread by at least
    ``min_sfb_std``.
    """
    sfbm = bool(summary.values.get("sfbm"))
    beim = bool(summary.values.get("beim"))
    checks: dict[str, Any] = {"setting": summary.label}
    for i, mech in enumerate(summary.mechanisms):
        layers = list(mech.values())
        if beim:
            checks[f"ternary_{i}"] = any(
                l["positive_fraction"] >= min_fraction and l["negative_fraction"] >= min_fraction for l in layers
            )
        if sfbm:
            checks[f"sfb_spread_{i}"] = any((l["sfb_std"] or 0.0) >= min_sfb_std for l in layers)
    checks["active"] = all(v for k, v in checks.items() if k != "setting")
    return checks
