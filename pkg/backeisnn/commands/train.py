"""train command: one run, or the continuation of an interrupted one."""

from __future__ import annotations

from typing import Optional

import typer

from backeisnn.commands.common import (
    BATCH_SIZE_OPTION,
    BEIM_OPTION,
    CONFIG_OPTION,
    DATASET_OPTION,
    EPOCHS_OPTION,
    GATE_KERNEL_OPTION,
    PRESET_OPTION,
    SFBM_OPTION,
    STRUCTURE_OPTION,
    TEST_LIMIT_OPTION,
    TIME_STEPS_OPTION,
    TRAIN_LIMIT_OPTION,
    WORKERS_OPTION,
    echo_table,
    resolve_config,
)
from backeisnn.services.context import build_context
from backeisnn.services.experiments import resume_training, run_training
from backeisnn.utils.command import run_command


def train_command(
    config: Optional[str] = CONFIG_OPTION,
    preset: Optional[str] = PRESET_OPTION,
    dataset: Optional[str] = DATASET_OPTION,
    structure: Optional[str] = STRUCTURE_OPTION,
    time_steps: Optional[int] = TIME_STEPS_OPTION,
    gate_kernel: Optional[int] = GATE_KERNEL_OPTION,
    sfbm: Optional[bool] = SFBM_OPTION,
    beim: Optional[bool] = BEIM_OPTION,
    epochs: Optional[int] = EPOCHS_OPTION,
    batch_size: Optional[int] = BATCH_SIZE_OPTION,
    train_limit: Optional[int] = TRAIN_LIMIT_OPTION,
    test_limit: Optional[int] = TEST_LIMIT_OPTION,
    workers: Optional[int] = WORKERS_OPTION,
    reset_mode: Optional[str] = typer.Option(None, "--reset-mode", help="magnitude|literal"),
    encoding: Optional[str] = typer.Option(None, "--encoding", help="bernoulli|direct|event"),
    run_dir: Optional[str] = typer.Option(None, "--run-dir", help="Run directory (default: <out>/<dataset>-run-seed<seed>)."),
    resume: Optional[str] = typer.Option(None, "--resume", help="Continue the run in this directory from last.ckpt."),
    debug: bool = False,
):
    """Train a network; writes metrics, checkpoints and confusion matrices into the run directory."""
    ctx = build_context(None, debug)

    def body():
        data_root = ctx.settings.data_root
        if resume:
            return resume_training(resume, data_root=data_root, epochs=epochs)
        cfg = resolve_config(
            ctx,
            preset,
            config,
            dataset=dataset,
            structure=structure,
            time_steps=time_steps,
            gate_kernel=gate_kernel,
            sfbm=sfbm,
            beim=beim,
            epochs=epochs,
            batch_size=batch_size,
            train_limit=train_limit,
            test_limit=test_limit,
            workers=workers,
            reset_mode=reset_mode,
            encoding=encoding,
        )
        return run_training(cfg, data_root=data_root, run_path=run_dir)

    result = run_command(ctx, body)
    echo_table(result.rows)
    typer.echo(f"Best test accuracy: {result.best_accuracy:.4f}")
    typer.echo(f"Run directory: {result.run_path}")
