"""Deterministic CSV output shared by all writers."""

from __future__ import annotations

import csv
import numbers
from typing import Iterable, Sequence


def format_value(value) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return f"{float(value):.17g}"
    return str(value)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(list(header))
        for row in rows:
            wr.writerow([format_value(v) for v in row])
