"""Small shared helpers for the plot-ready CSV and JSON files."""

import csv
import io
import math
from pathlib import Path


def fmt(value, digits=9):
    """Format a number with ``digits`` significant digits (``nan`` for missing)."""
    if value is None:
        return "nan"
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def write_csv(path, header, rows):
    """Write ``rows`` under ``header`` as UTF-8 CSV with LF line endings.

    Floats are written with 9 significant digits, anything else via ``str``.
    Returns the CSV text as well, which makes byte-level comparisons easy.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="")
    return text


def read_csv(path):
    """Return ``(header, rows)`` of a CSV file, rows as lists of strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV file") from None
        rows = [r for r in reader if r]
    return [h.strip() for h in header], rows
