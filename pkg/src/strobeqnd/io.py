"""CSV input/output.

Files have a header row, comma separators and LF line endings; floating
point values are written with 9 significant digits.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9g}"


def write_csv(path, header, rows) -> Path:
    """Write ``rows`` (iterables matching ``header``) to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([format_value(v) for v in row])
    return path


def write_columns(path, header, *columns) -> Path:
    """Write equal-length numeric columns."""
    cols = [np.asarray(c) for c in columns]
    return write_csv(path, header, zip(*(c.tolist() for c in cols)))


def read_csv(path):
    """Return ``(header, rows)`` with every field as a string."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = [r for r in reader if r]
    return header, rows
