"""Config loading and atomic CSV / JSON writers."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError

TIMESTAMP_PREFIX = "# created: "


def load_json_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def check_keys(doc: dict, schema: dict, where: str = "") -> None:
    """Reject keys absent from ``schema``; nested dict schemas are checked recursively."""
    for key, value in doc.items():
        path = f"{where}.{key}" if where else key
        if key not in schema:
            raise ConfigError(f"unknown key '{path}'")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{path}' must be an object")
            check_keys(value, sub, path)


def dump_config(doc: dict) -> str:
    """Canonical JSON text for a config (sorted keys, fixed separators)."""
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def timestamp_line(now: datetime | None = None) -> str:
    now = now or datetime.now(timezone.utc)
    return TIMESTAMP_PREFIX + now.strftime("%Y-%m-%dT%H:%M:%SZ")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path, header, rows, meta: dict | None = None) -> Path:
    """Write rows with ``#`` metadata lines, one timestamp line and a header row.

    Floats are written with ``repr`` so identical inputs give identical bytes.
    """
    path = Path(path)
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {value}\n")
    buf.write(timestamp_line() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    _atomic_write(path, buf.getvalue())
    return path


def read_csv(path):
    """(header, rows as lists of strings), skipping ``#`` lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def write_json(path, doc) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
