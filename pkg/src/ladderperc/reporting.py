"""CSV, JSON and JSON-lines writers with a versioned column contract."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CSV_VERSION = 1


def _plain(x):
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (tuple, set, frozenset)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_plain(v) for v in x]
    return x


def _cell(x) -> str:
    x = _plain(x)
    if isinstance(x, list):
        return " ".join(_cell(v) for v in x)
    if isinstance(x, float):
        return repr(x)
    if x is None:
        return ""
    return str(x)


def csv_text(table: str, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    """CSV with a header comment naming the table and the column contract version."""
    buf = io.StringIO()
    buf.write(f"# ladderperc table={table} csv_version={CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells, expected {len(columns)}")
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[dict, list[dict]]:
    """Parse a file written by :func:`write_csv` into (header fields, rows)."""
    text = Path(path).read_text()
    first, rest = text.split("\n", 1)
    meta = dict(kv.split("=", 1) for kv in first.lstrip("# ").split()[1:])
    return meta, list(csv.DictReader(io.StringIO(rest)))


def _writable(path) -> Path:
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {p.parent}: {exc}") from exc
    return p


def write_csv(path, table: str, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    p = _writable(path)
    p.write_text(csv_text(table, columns, rows))
    return p


def write_json(path, data) -> Path:
    p = _writable(path)
    p.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
    return p


class AuditLog:
    """Line-delimited JSON records, one per sample or check."""

    def __init__(self, path=None):
        self.path = _writable(path) if path is not None else None
        self._fh = open(self.path, "w") if self.path is not None else None
        self.count = 0

    def write(self, record: dict):
        self.count += 1
        if self._fh is not None:
            self._fh.write(json.dumps(_plain(record), sort_keys=True) + "\n")

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
