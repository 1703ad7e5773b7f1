"""CSV emission with provenance comment headers.

Format: RFC-4180 style rows, '.' decimal, '#'-prefixed comment lines on top.
Floats are written with %.12g so reruns of the same configuration produce
byte-identical data rows.
"""

from __future__ import annotations

import numbers
from pathlib import Path


def format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return f"{float(value):.12g}"
    return str(value)


def write_csv(path, columns, rows, comments=()) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        for line in comments:
            f.write(f"# {line}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(format_cell(v) for v in row) + "\n")


def read_data_rows(path) -> list[str]:
    """Non-comment lines of a CSV, for determinism comparisons."""
    with open(path) as f:
        return [ln.rstrip("\n") for ln in f if not ln.startswith("#")]
