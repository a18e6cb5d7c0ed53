"""Error types and exit-code classification for the training harness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import click
import pydantic
import yaml

from backeisnn.utils.serialization import to_plain


EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(RuntimeError):
    """Raised for user-caused errors (bad config values, bad flags)."""


class ShapeError(ValueError):
    """Raised when tensor shapes or layer geometry do not agree."""


class DataError(RuntimeError):
    """Raised for missing, truncated or malformed dataset files."""


class DataFormatError(DataError):
    """Bad magic number or a layout the loader does not understand."""


class TruncatedDataError(DataError):
    pass


class CountMismatchError(DataError):
    """Header counts disagree with each other or with the payload."""


class NumericError(ArithmeticError):
    """Raised when a NaN/Inf appears in values, losses or gradients."""

    def __init__(self, message: str, details: Any | None = None) -> None:
        super().__init__(message)
        self.details = details


@dataclass(frozen=True)
class ErrorInfo:
    code: int
    kind: str
    message: str | None = None
    details: Any | None = None


def classify_error(e: Exception) -> ErrorInfo:
    if isinstance(e, (ConfigError, ShapeError, click.BadParameter)):
        return ErrorInfo(code=EXIT_CONFIG, kind="Config error", message=str(e))

    if isinstance(e, pydantic.ValidationError):
        details = [
            {"field": ".".join(str(p) for p in err["loc"]), "error": err["msg"]}
            for err in e.errors()
        ]
        return ErrorInfo(
            code=EXIT_CONFIG,
            kind="Config error",
            message=f"{e.error_count()} invalid config value(s)",
            details=details,
        )

    if isinstance(e, (DataError, FileNotFoundError)):
        return ErrorInfo(code=EXIT_DATA, kind="Data error", message=str(e))

    if isinstance(e, NumericError):
        return ErrorInfo(
            code=EXIT_NUMERIC,
            kind="Numeric error",
            message=str(e),
            details=e.details,
        )

    return ErrorInfo(code=EXIT_INTERNAL, kind="Internal error", message=str(e) or None)


def print_error(e: Exception, debug: bool = False) -> int:
    """
    Print a classified error to stderr and return the exit code.
    """
    info = classify_error(e)
    click.echo(f"Error: {info.kind}", err=True)
    if info.message:
        click.echo(f"Message: {info.message}", err=True)
    if info.details is not None:
        rendered = yaml.safe_dump(
            to_plain(info.details), sort_keys=False, allow_unicode=True
        ).rstrip()
        click.echo("Details:", err=True)
        click.echo(rendered, err=True)
    if debug:
        click.echo(f"Exception: {type(e).__name__}", err=True)
    return info.code
