"""Plain-text artifacts: CSV tables and ``key = value`` report files."""
from __future__ import annotations

import math

import numpy as np

from .config import parse_value


def fmt(value) -> str:
    """17 significant digits, locale independent; empty for missing values, strings verbatim."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def write_csv(path, header, columns):
    """Write equally long columns under ``header`` (a sequence of names)."""
    cols = [list(c) for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _column(cells):
    try:
        return np.array([float(v) if v else math.nan for v in cells], dtype=float)
    except ValueError:
        return np.array(cells, dtype=object)


def read_csv(path):
    """Header and columns of a CSV written by :func:`write_csv`.

    Numeric columns come back as float arrays (empty cells become NaN),
    anything else as object arrays of strings.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if any(len(r) != len(header) for r in rows):
        raise ValueError(f"{path}: row length differs from header")
    cols = list(zip(*rows)) if rows else [()] * len(header)
    return header, {name: _column(c) for name, c in zip(header, cols)}


def _report_value(v):
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple, np.ndarray)):
        items = [fmt(x) for x in v]
        return ", ".join(items) + ("," if len(items) == 1 else "")
    return fmt(v)


def write_report(path, entries: dict):
    """One ``key = value`` line per entry, in insertion order."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in entries.items():
            if value is None:
                continue
            if isinstance(value, (list, tuple, np.ndarray)) and len(value) == 0:
                continue
            fh.write(f"{key} = {_report_value(value)}\n")


def read_report(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            key, raw = line.split("=", 1)
            raw = raw.strip()
            out[key.strip()] = math.nan if raw == "nan" else parse_value(raw)
    return out
