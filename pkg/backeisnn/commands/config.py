"""Config commands."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from tabulate import tabulate

from backeisnn.commands.common import CONFIG_OPTION, PRESET_OPTION, resolve_config
from backeisnn.run_config import RunConfig, list_presets, load_preset
from backeisnn.services.context import build_context, load_settings_with_overrides
from backeisnn.settings import DEFAULT_CONFIGFILE
from backeisnn.utils.command import run_command
from backeisnn.utils.io import write_or_print
from backeisnn.utils.serialization import flatten, render_output


app = typer.Typer(no_args_is_help=True)

RUN_TEMPLATE = "run.yaml"


@app.command("init")
def config_init(
    force: bool = typer.Option(
        False, "--force", "-f", help="Overwrite existing config files."
    ),
):
    """
    Create .backeisnn.yaml and a commented run config template in the current directory.
    """
    settings_path = Path.cwd() / DEFAULT_CONFIGFILE
    run_path = Path.cwd() / RUN_TEMPLATE
    existing = [p for p in (settings_path, run_path) if p.exists()]
    if existing and not force:
        typer.echo(f"Config file already exists: {', '.join(str(p) for p in existing)}")
        if not typer.confirm("Overwrite?", default=False):
            return

    settings_template = (
        "# backeisnn settings\n"
        '# data_root: "/path/to/datasets"\n'
        '# out_dir: "runs"\n'
        '# dtype: "float32"\n'
        "# debug: false\n"
    )
    settings_path.write_text(settings_template, encoding="utf-8")
    run_path.write_text(
        "# Run config: every key is optional; unset keys take the preset or built-in default.\n"
        "# preset: mnist\n" + RunConfig().to_yaml(),
        encoding="utf-8",
    )
    typer.echo(f"Created {settings_path}")
    typer.echo(f"Created {run_path}")


@app.command("show")
def config_show(
    config: Optional[str] = CONFIG_OPTION,
    preset: Optional[str] = PRESET_OPTION,
    flat: bool = typer.Option(False, "--flat", help="Print a key/value table."),
    format: str = typer.Option("yaml", "--format", help="yaml|json"),
    output: str | None = None,
):
    """
    Show the effective settings and the resolved run config.
    """
    ctx = build_context(format)

    def body():
        settings = load_settings_with_overrides()
        return {
            "settings": {
                "data_root": settings.data_root,
                "out_dir": settings.out_dir,
                "dtype": settings.dtype,
                "debug": settings.debug,
            },
            "run": resolve_config(ctx, preset, config).model_dump(mode="json"),
        }

    payload = run_command(ctx, body)
    if flat:
        rows = sorted(flatten(payload).items())
        write_or_print(tabulate(rows, headers=["key", "value"], tablefmt="github"), output)
        return
    write_or_print(render_output(payload, format), output)


@app.command("presets")
def config_presets():
    """
    List the built-in presets.
    """
    rows = []
    for name in list_presets():
        values = load_preset(name)
        rows.append(
            {
                "preset": name,
                "dataset": values.get("dataset", "mnist"),
                "structure": values.get("structure", RunConfig.model_fields["structure"].default),
                "T": values.get("time_steps", RunConfig.model_fields["time_steps"].default),
                "kernel": values.get("gate_kernel", RunConfig.model_fields["gate_kernel"].default),
            }
        )
    typer.echo(tabulate(rows, headers="keys", tablefmt="github"))
