"""CSV/JSON table output with full double precision."""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np


def fmt(value):
    """Cell text: 17 significant digits for reals, empty for ``None``."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def to_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _json_cell(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def to_json(rows, columns):
    data = [{c: _json_cell(row.get(c)) for c in columns} for row in rows]
    return json.dumps(data, indent=1, allow_nan=False) + "\n"


def render(rows, columns, kind="csv"):
    return to_csv(rows, columns) if kind == "csv" else to_json(rows, columns)


def write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
