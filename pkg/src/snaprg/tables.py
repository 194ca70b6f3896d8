"""Tab-separated tables and JSON summaries written byte-for-byte
reproducibly: fixed float formatting, sorted keys, no timestamps."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return "nan"
    return str(v)


def _atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_tsv(path, columns, rows, comments=()) -> None:
    """``#``-prefixed comment lines, one header line, then the rows."""
    lines = [f"# {c}" for c in comments]
    lines.append("\t".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row of {len(row)} values for {len(columns)} columns")
        lines.append("\t".join(_fmt(v) for v in row))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_tsv(path) -> tuple[list[str], list[list[str]], list[str]]:
    """Inverse of :func:`write_tsv`: ``(columns, rows, comments)``."""
    comments, header, rows = [], None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line[1:].strip())
            elif header is None:
                header = line.split("\t")
            else:
                rows.append(line.split("\t"))
    if header is None:
        raise ValueError(f"{path}: no header line")
    return header, rows, comments


def read_degrees(path) -> np.ndarray:
    """Degrees from a table with a ``degree`` column, or one integer per line."""
    with open(path, encoding="utf-8") as fh:
        text = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not text:
        raise ValueError(f"{path}: no degrees found")
    first = text[0].split("\t")
    if "degree" in first:
        col = first.index("degree")
        body = [ln.split("\t")[col] for ln in text[1:]]
    else:
        body = text
    try:
        k = np.array([int(v) for v in body], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer degree ({exc})") from None
    if k.size == 0:
        raise ValueError(f"{path}: no degrees found")
    return k


def write_json(path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, default=_json_default)
    _atomic_write(path, (text + "\n").encode("utf-8"))


def _json_default(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
