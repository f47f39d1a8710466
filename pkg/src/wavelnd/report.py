"""Deterministic JSON/CSV serialization of run reports."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import numpy as np

SCHEMA_VERSION = 1


class ReportError(OSError):
    pass


@dataclass
class RunReport:
    command: str
    config: dict
    results: Any
    seed: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)
    # (header, rows) for CSV output
    table: Optional[tuple] = None
    timestamp: Optional[str] = None

    def to_record(self) -> dict:
        rec = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "diagnostics": self.diagnostics,
            "seed": self.seed,
        }
        if self.timestamp is not None:
            rec["timestamp"] = self.timestamp
        return to_jsonable(rec)


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def to_jsonable(obj):
    """Plain JSON types from dataclasses, numpy scalars/arrays and tuples.

    Non-finite floats stay floats; they are written as ``Infinity``/``NaN``,
    which the standard json module reads back.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return to_jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dumps_json(record: dict) -> str:
    # float repr is the shortest round-trip decimal
    return json.dumps(record, indent=2, ensure_ascii=True) + "\n"


def _fmt_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def dumps_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_cell(v) for v in row])
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise ReportError(f"output directory does not exist: {parent}")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render(report: RunReport, fmt: str) -> str:
    if fmt == "json":
        return dumps_json(report.to_record())
    if fmt == "csv":
        if report.table is None:
            raise ReportError(f"command '{report.command}' has no tabular output")
        header, rows = report.table
        return dumps_csv(header, rows)
    raise ReportError(f"unknown format {fmt!r}")


def write_report(report: RunReport, path, fmt: str = "json") -> None:
    text = render(report, fmt)
    try:
        atomic_write_text(path, text)
    except ReportError:
        raise
    except OSError as exc:
        raise ReportError(f"could not write {path}: {exc}") from exc
