"""Result tables on disk: CSV with a header row or a JSON document.

Floats are written with 17 significant digits so values survive a round trip
bit for bit. ``None`` is an empty CSV cell / JSON ``null``; infinities are
written as ``inf`` / ``-inf`` in CSV and as the strings ``"inf"`` in JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

FORMATS = ("csv", "json")


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt_float(v)
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return _fmt_float(v)
    if isinstance(v, float):
        return float(format(v, ".17g"))
    return v


def columns_of(rows: Sequence[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> List[str]:
    if columns is not None:
        return list(columns)
    seen: Dict[str, None] = {}
    for row in rows:
        for key in row:
            seen.setdefault(key, None)
    return list(seen)


def to_csv(rows: Sequence[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
    cols = columns_of(rows, columns)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in cols])
    return buf.getvalue()


def to_json(rows: Sequence[Dict[str, Any]], metadata: Optional[Dict[str, Any]] = None,
            columns: Optional[Sequence[str]] = None) -> str:
    cols = columns_of(rows, columns)
    doc = {"metadata": metadata or {}, "columns": cols,
           "rows": [{c: _json_value(row.get(c)) for c in cols} for row in rows]}
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def emit(rows: Sequence[Dict[str, Any]], fmt: str, path, metadata: Optional[Dict[str, Any]] = None,
         columns: Optional[Sequence[str]] = None) -> Path:
    """Write ``rows`` to ``path``; CSV metadata goes to ``<path>.meta.json``."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            path.write_text(to_csv(rows, columns))
            if metadata is not None:
                path.with_name(path.name + ".meta.json").write_text(json.dumps(metadata, indent=1) + "\n")
        else:
            path.write_text(to_json(rows, metadata, columns))
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc
    return path


def _parse_scalar(s: str) -> Any:
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def parse_csv(text: str) -> List[Dict[str, Any]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return []
    return [dict(zip(header, (_parse_scalar(c) for c in line))) for line in reader]


def parse_json(text: str) -> List[Dict[str, Any]]:
    rows = json.loads(text)["rows"]
    return [{k: float(v) if v in ("inf", "-inf", "nan") else v for k, v in row.items()} for row in rows]


def read_table(path) -> List[Dict[str, Any]]:
    path = Path(path)
    text = path.read_text()
    return parse_json(text) if path.suffix == ".json" else parse_csv(text)
