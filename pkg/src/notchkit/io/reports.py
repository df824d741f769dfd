"""CSV report writing with a fixed numeric format.

All run artifacts that hold numbers go through ``write_report`` so that a
fixed-seed run produces byte-identical files: floats are printed with four
decimals, infinities as ``inf``/``-inf`` (the PSNR of identical images),
integers bare, and rows must share one schema.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import DataError


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            raise DataError("refusing to write NaN into a report")
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.4f}"
    return str(value)


def write_report(rows: Sequence[Mapping], path: str | Path,
                 columns: Sequence[str] | None = None) -> None:
    """Write rows of one schema as CSV; empty rows give a header-only file."""
    rows = list(rows)
    if columns is None:
        if not rows:
            raise DataError("write_report needs explicit columns for an empty row list")
        columns = list(rows[0].keys())
    columns = list(columns)
    if not columns:
        raise DataError("write_report needs at least one column")
    key_set = set(columns)
    for i, row in enumerate(rows):
        if set(row.keys()) != key_set:
            raise DataError(
                f"report row {i} keys {sorted(row.keys())} do not match "
                f"columns {sorted(columns)}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row[c]) for c in columns])


def read_report(path: str | Path) -> list[dict[str, str]]:
    """Read a CSV report back as string-valued rows (callers coerce)."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except FileNotFoundError as e:
        raise DataError(f"report file not found: {path}") from e
