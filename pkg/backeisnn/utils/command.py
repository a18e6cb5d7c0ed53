"""Shared command helpers."""

from __future__ import annotations

from collections.abc import Callable
from typing import Optional, TypeVar

import typer

from backeisnn.services.context import CommandContext
from backeisnn.utils.errors import print_error
from backeisnn.utils.io import write_or_print
from backeisnn.utils.serialization import render_output


T = TypeVar("T")


def run_command(ctx: CommandContext, call: Callable[[], T]) -> T:
    """
    Execute the command body and convert failures into typer.Exit with the
    category exit code.
    """
    try:
        return call()
    except typer.Exit:
        raise
    except Exception as e:
        settings = getattr(ctx, "settings", None)
        debug = bool(getattr(settings, "debug", False)) if settings is not None else False
        code = print_error(e, debug=debug)
        raise typer.Exit(code=code)


def run_and_render(
    ctx: CommandContext,
    call: Callable[[], object],
    output: Optional[str],
) -> object:
    """
    Execute the command body, then render its result in the context's format.
    """
    result = run_command(ctx, call)
    write_or_print(render_output(result, ctx.out_format), output)
    return result
