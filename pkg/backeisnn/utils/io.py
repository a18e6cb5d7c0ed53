"""I/O helpers for CLI commands and run directories."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Optional


def write_or_print(rendered: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(rendered, encoding="utf-8")
        print(f"Results saved to {output}")
    else:
        print(rendered)


def write_csv(headers: Iterable[str] | None, rows: Iterable[Iterable[object]], output: str | Path) -> None:
    """Write rows to a CSV file; ``headers=None`` writes a bare grid."""
    with open(output, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        if headers is not None:
            writer.writerow(list(headers))
        writer.writerows(list(rows))


def append_csv_row(headers: Iterable[str], row: Iterable[object], output: str | Path) -> None:
    """Append one row, writing the header first when the file is new."""
    path = Path(output)
    is_new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        if is_new:
            writer.writerow(list(headers))
        writer.writerow(list(row))


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
