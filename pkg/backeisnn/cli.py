"""
BackEISNN command-line harness.

Commands:
- backeisnn train ...     (train or --resume a run)
- backeisnn eval ...      (score a checkpoint)
- backeisnn ablate ...    (baseline / +SFBM / +BEIM / both)
- backeisnn sweep ...     (gate kernel size or simulation length)
- backeisnn gradcheck ... (finite-difference check of the BPTT gradients)
- backeisnn config ...    (init, show, presets)
"""

from __future__ import annotations

import typer

from backeisnn import __version__

from backeisnn.commands import ablate, config, evaluate, gradcheck, train


app = typer.Typer(no_args_is_help=True)


def _version_callback(value: bool) -> None:
    if value:
        typer.echo(__version__)
        raise typer.Exit()


@app.callback()
def _main(
    ctx: typer.Context,
    debug: bool = typer.Option(
        False,
        "--debug",
        help="Enable debug logging.",
    ),
    data_root: str | None = typer.Option(
        None,
        "--data-root",
        help="Directory holding the dataset folders for this command only.",
    ),
    seed: int | None = typer.Option(
        None,
        "--seed",
        help="Override the run seed.",
    ),
    dtype: str | None = typer.Option(
        None,
        "--dtype",
        help="float32|float64",
    ),
    out_dir: str | None = typer.Option(
        None,
        "--out",
        help="Parent directory of run directories.",
    ),
    version: bool = typer.Option(
        False,
        "--version",
        help="Show CLI version and exit.",
        callback=_version_callback,
        is_eager=True,
    ),
) -> None:
    ctx.ensure_object(dict)
    ctx.obj["debug"] = debug
    ctx.obj["data_root"] = data_root
    ctx.obj["seed"] = seed
    ctx.obj["dtype"] = dtype
    ctx.obj["out_dir"] = out_dir
app.command("train")(train.train_command)
app.command("eval")(evaluate.eval_command)
app.command("ablate")(ablate.ablate_command)
app.command("sweep")(ablate.sweep_command)
app.command("gradcheck")(gradcheck.gradcheck_command)
app.add_typer(config.app, name="config")


def main() -> None:
    app()


if __name__ == "__main__":
    main()
