"""ablate and sweep commands."""

from __future__ import annotations

from typing import Optional

import typer

from backeisnn.commands.common import (
    BATCH_SIZE_OPTION,
    CONFIG_OPTION,
    DATASET_OPTION,
    EPOCHS_OPTION,
    GATE_KERNEL_OPTION,
    PRESET_OPTION,
    STRUCTURE_OPTION,
    TEST_LIMIT_OPTION,
    TIME_STEPS_OPTION,
    TRAIN_LIMIT_OPTION,
    WORKERS_OPTION,
    echo_table,
    resolve_config,
)
from backeisnn.services.context import build_context
from backeisnn.services.experiments import SWEEP_AXES, mechanism_check, run_ablation, run_sweep
from backeisnn.utils.command import run_command
from backeisnn.utils.errors import ConfigError


REPEATS_OPTION = typer.Option(1, "--repeats", "-r", help="Runs per setting, seeds seed..seed+repeats-1.")


def _parse_values(values: Optional[str]) -> list[int] | None:
    if not values:
        return None
    try:
        return [int(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated integers, got {values!r}") from None


def ablate_command(
    config: Optional[str] = CONFIG_OPTION,
    preset: Optional[str] = PRESET_OPTION,
    dataset: Optional[str] = DATASET_OPTION,
    structure: Optional[str] = STRUCTURE_OPTION,
    time_steps: Optional[int] = TIME_STEPS_OPTION,
    gate_kernel: Optional[int] = GATE_KERNEL_OPTION,
    epochs: Optional[int] = EPOCHS_OPTION,
    batch_size: Optional[int] = BATCH_SIZE_OPTION,
    train_limit: Optional[int] = TRAIN_LIMIT_OPTION,
    test_limit: Optional[int] = TEST_LIMIT_OPTION,
    workers: Optional[int] = WORKERS_OPTION,
    repeats: int = REPEATS_OPTION,
    debug: bool = False,
):
    """Train baseline, +SFBM, +BEIM and both; write ablation.csv."""
    ctx = build_context(None, debug)

    def body():
        cfg = resolve_config(
            ctx,
            preset,
            config,
            dataset=dataset,
            structure=structure,
            time_steps=time_steps,
            gate_kernel=gate_kernel,
            epochs=epochs,
            batch_size=batch_size,
            train_limit=train_limit,
            test_limit=test_limit,
            workers=workers,
        )
        return run_ablation(cfg, repeats=repeats, data_root=ctx.settings.data_root)

    summaries, path = run_command(ctx, body)
    echo_table([s.row() for s in summaries])
    typer.echo("")
    echo_table([mechanism_check(s) for s in summaries if s.values.get("sfbm") or s.values.get("beim")])
    typer.echo(f"Summary written to {path}")


def sweep_command(
    axis: str = typer.Argument(..., help=f"{'|'.join(SWEEP_AXES)}"),
    values: Optional[str] = typer.Option(None, "--values", help="Comma-separated axis values, e.g. 1,3,5,7."),
    config: Optional[str] = CONFIG_OPTION,
    preset: Optional[str] = PRESET_OPTION,
    dataset: Optional[str] = DATASET_OPTION,
    structure: Optional[str] = STRUCTURE_OPTION,
    epochs: Optional[int] = EPOCHS_OPTION,
    batch_size: Optional[int] = BATCH_SIZE_OPTION,
    train_limit: Optional[int] = TRAIN_LIMIT_OPTION,
    test_limit: Optional[int] = TEST_LIMIT_OPTION,
    workers: Optional[int] = WORKERS_OPTION,
    repeats: int = REPEATS_OPTION,
    debug: bool = False,
):
    """Train once per gate kernel size or simulation length; write sweep.csv."""
    ctx = build_context(None, debug)

    def body():
        cfg = resolve_config(
            ctx,
            preset,
            config,
            dataset=dataset,
            structure=structure,
            epochs=epochs,
            batch_size=batch_size,
            train_limit=train_limit,
            test_limit=test_limit,
            workers=workers,
        )
        return run_sweep(
            cfg,
            axis,
            values=_parse_values(values),
            repeats=repeats,
            data_root=ctx.settings.data_root,
        )

    summaries, path = run_command(ctx, body)
    echo_table([s.row() for s in summaries])
    typer.echo(f"Summary written to {path}")
