"""gradcheck command."""

from __future__ import annotations

from typing import Optional

import typer

from backeisnn.commands.common import CONFIG_OPTION, PRESET_OPTION, STRUCTURE_OPTION, resolve_config
from backeisnn.services.context import build_context
from backeisnn.services.gradcheck import run_gradcheck
from backeisnn.utils.command import run_and_render
from backeisnn.utils.errors import EXIT_NUMERIC


def gradcheck_command(
    config: Optional[str] = CONFIG_OPTION,
    preset: Optional[str] = typer.Option("gradcheck", "--preset", "-p", help="Built-in preset."),
    structure: Optional[str] = STRUCTURE_OPTION,
    samples: int = typer.Option(50, "--samples", help="Parameter entries to perturb."),
    h: float = typer.Option(1e-4, "--h", help="Finite-difference step."),
    threshold: float = typer.Option(1e-5, "--threshold", help="Largest accepted relative error."),
    input_size: int = typer.Option(8, "--input-size", help="Square input side used for the check."),
    format: Optional[str] = None,
    output: Optional[str] = None,
    debug: bool = False,
):
    """Compare BPTT gradients against central differences; exit 4 on failure."""
    ctx = build_context(format, debug)

    def body():
        cfg = resolve_config(ctx, preset, config, structure=structure)
        report = run_gradcheck(cfg, samples=samples, h=h, threshold=threshold, input_size=input_size)
        payload = report.summary()
        payload["worst"] = [
            {"parameter": e.label, "analytic": e.analytic, "numeric": e.numeric, "error": e.error}
            for e in report.worst()
        ]
        return payload

    payload = run_and_render(ctx, body, output)
    if not payload["passed"]:
        typer.echo("Error: Numeric error", err=True)
        typer.echo(f"Message: gradient check failed (max relative error {payload['max_rel_error']:.3e})", err=True)
        raise typer.Exit(code=EXIT_NUMERIC)
