"""Options and config resolution shared by the run commands."""

from __future__ import annotations

from typing import Any, Optional

import typer
from tabulate import tabulate

from backeisnn.run_config import RunConfig, resolve_run_config
from backeisnn.services.context import CommandContext, global_run_overrides


CONFIG_OPTION = typer.Option(None, "--config", "-c", help="Run config YAML file.")
PRESET_OPTION = typer.Option(None, "--preset", "-p", help="Built-in preset (see 'config presets').")
DATASET_OPTION = typer.Option(None, "--dataset", help="mnist|fashion|nmnist|cifar10|synthetic")
STRUCTURE_OPTION = typer.Option(None, "--structure", help="Architecture string, e.g. 15C5-P2-40C5-P2-300.")
TIME_STEPS_OPTION = typer.Option(None, "--time-steps", "-T", help="Simulation length.")
GATE_KERNEL_OPTION = typer.Option(None, "--gate-kernel", "-k", help="Kernel size of both gates (odd).")
SFBM_OPTION = typer.Option(None, "--sfbm/--no-sfbm", help="Self-feedback gate on/off.")
BEIM_OPTION = typer.Option(None, "--beim/--no-beim", help="Excitatory/inhibitory gate on/off.")
EPOCHS_OPTION = typer.Option(None, "--epochs", help="Training epochs.")
BATCH_SIZE_OPTION = typer.Option(None, "--batch-size", help="Samples per batch.")
TRAIN_LIMIT_OPTION = typer.Option(None, "--train-limit", help="Use only the first N training samples.")
TEST_LIMIT_OPTION = typer.Option(None, "--test-limit", help="Use only the first N test samples.")
WORKERS_OPTION = typer.Option(None, "--workers", help="Threads evaluating micro-batches.")
FORMAT_OPTION = typer.Option(None, "--format", help="yaml|json")


def resolve_config(ctx: CommandContext, preset: Optional[str], config: Optional[str], **flags: Any) -> RunConfig:
    """Settings < preset < config file < command flags < global flags."""
    overrides = {k: v for k, v in flags.items() if v is not None}
    overrides.update({k: v for k, v in global_run_overrides().items() if v is not None})
    defaults = {"out_dir": ctx.settings.out_dir, "dtype": ctx.settings.dtype}
    return resolve_run_config(preset, config, overrides, defaults)


def echo_table(rows: list[dict[str, Any]], floatfmt: str = ".4f") -> None:
    if not rows:
        typer.echo("(no rows)")
        return
    typer.echo(tabulate(rows, headers="keys", tablefmt="github", floatfmt=floatfmt))
