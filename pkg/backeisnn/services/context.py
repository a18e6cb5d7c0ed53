"""Context helpers for CLI commands."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import click

from backeisnn.settings import Settings, get_settings


@dataclass
class CommandContext:
    settings: Settings
    out_format: str = "yaml"

    @property
    def debug(self) -> bool:
        return self.settings.debug


def _get_cli_overrides() -> dict[str, Any]:
    ctx = click.get_current_context(silent=True)
    if ctx is None:
        return {}
    root = ctx.find_root()
    if isinstance(root.obj, dict):
        return root.obj
    return {}


def _apply_overrides(settings: Settings, overrides: dict[str, Any]) -> None:
    for field in ("data_root", "out_dir", "dtype"):
        if overrides.get(field) is not None:
            setattr(settings, field, overrides[field])
    if overrides.get("debug"):
        settings.debug = True


def configure_logging(debug: bool) -> None:
    """
    DEBUG logging to stderr when requested; otherwise training progress at INFO.
    """
    logging.basicConfig(
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        level=logging.DEBUG if debug else logging.INFO,
    )


def global_run_overrides() -> dict[str, Any]:
    """Global flags that also override run-config keys (``--seed``, ``--dtype``, ``--out``)."""
    overrides = _get_cli_overrides()
    return {
        "seed": overrides.get("seed"),
        "dtype": overrides.get("dtype"),
        "out_dir": overrides.get("out_dir"),
    }


def load_settings_with_overrides() -> Settings:
    settings = get_settings()
    _apply_overrides(settings, _get_cli_overrides())
    return settings


def build_context(format_override: str | None = None, debug: bool = False) -> CommandContext:
    settings = load_settings_with_overrides()
    if debug:
        settings.debug = True
    configure_logging(settings.debug)
    return CommandContext(settings=settings, out_format=(format_override or "yaml").strip().lower())
