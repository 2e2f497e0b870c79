"""Lossless CSV/JSON tables with a metadata header.

CSV layout::

    # key: <json value>
    ...
    col1,col2,...
    v11,v12,...

Floats are written with ``repr`` so a read/write cycle reproduces the bytes.
JSON files hold ``{"header": {...}, "columns": [...], "rows": [[...], ...]}``.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

FORMATS = ("csv", "json")


def _plain(value):
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def _cell(value) -> str:
    value = _plain(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(text: str):
    if text in ("true", "false"):
        return text == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def columns_of(rows) -> list[str]:
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    return cols


def to_csv(header: dict, rows: list[dict], columns=None) -> str:
    columns = list(columns) if columns is not None else columns_of(rows)
    buf = io.StringIO()
    for key, val in header.items():
        buf.write(f"# {key}: {json.dumps(_plain(val), sort_keys=True, allow_nan=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    if columns:
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def from_csv(text: str) -> tuple[dict, list[dict]]:
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            header[key] = json.loads(val)
        elif line:
            body.append(line)
    rows = []
    if body:
        reader = csv.reader(body)
        columns = next(reader)
        rows = [{c: _parse_cell(v) for c, v in zip(columns, rec)} for rec in reader]
    return header, rows


def to_json(header: dict, rows: list[dict], columns=None) -> str:
    columns = list(columns) if columns is not None else columns_of(rows)
    doc = {"header": _plain(header), "columns": columns,
           "rows": [[_plain(row.get(c)) for c in columns] for row in rows]}
    return json.dumps(doc, indent=1, allow_nan=True) + "\n"


def from_json(text: str) -> tuple[dict, list[dict]]:
    doc = json.loads(text)
    return doc["header"], [dict(zip(doc["columns"], rec)) for rec in doc["rows"]]


def write_table(path, header: dict, rows: list[dict], fmt: str = "csv", columns=None) -> Path:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    path = Path(path)
    text = to_csv(header, rows, columns) if fmt == "csv" else to_json(header, rows, columns)
    path.write_text(text)
    return path


def read_table(path) -> tuple[dict, list[dict]]:
    path = Path(path)
    text = path.read_text()
    return from_json(text) if path.suffix == ".json" else from_csv(text)


def trace_header(trace, digest: str, extra: dict | None = None) -> dict:
    cfg = dict(trace.config)
    head = {"scenario_hash": digest, "algorithm": trace.algorithm, "seed": trace.seed,
            "reason": trace.reason, "message": trace.message, "iterations": len(trace),
            "config": cfg}
    if extra:
        head.update(extra)
    return head


TRACE_COLUMNS = ("k", "objective", "residual", "power", "spread")
