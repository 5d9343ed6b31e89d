"""CSV ingestion.

One file per recording, one row per sample::

    t_ms,x_dva,y_dva[,target_x_dva,target_y_dva]

``NaN`` (any case) marks a missing value. Target columns repeat the target on
screen for each row; a change of target coordinates starts a new target.
Subject, session and task come from the file name (``S<subject>_<session>_<task>.csv``
by default).
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..signal import Recording, TargetEvent
from .config import DEFAULT_FILENAME_PATTERN

REQUIRED = ("t_ms", "x_dva", "y_dva")
TARGET_COLS = ("target_x_dva", "target_y_dva")


class IngestError(Exception):
    pass


class SchemaError(IngestError):
    pass


class ParseError(IngestError):
    def __init__(self, file, line, column, message):
        self.file, self.line, self.column = str(file), line, column
        super().__init__(f"{file}:{line}: column {column!r}: {message}")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    subject_id: str
    session_id: str
    task_tag: str


def parse_name(path, pattern: str = DEFAULT_FILENAME_PATTERN) -> ManifestEntry:
    m = re.search(pattern, Path(path).name)
    if not m:
        raise SchemaError(f"{path}: file name does not match {pattern!r}")
    g = m.groupdict()
    return ManifestEntry(str(path), g.get("subject", ""), g.get("session", ""), g.get("task", ""))


def _number(text, path, line, col):
    s = text.strip()
    if s.lower() == "nan":
        return math.nan
    try:
        v = float(s)
    except ValueError:
        raise ParseError(path, line, col, f"not a number: {text!r}") from None
    if math.isinf(v):
        raise ParseError(path, line, col, "infinite value")
    return v


def read_recording(path, entry: Optional[ManifestEntry] = None, fs: Optional[float] = None) -> Recording:
    path = Path(path)
    if entry is None:
        entry = ManifestEntry(str(path), "", "", "")
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if header[:3] != list(REQUIRED):
            raise SchemaError(f"{path}: header must start with {','.join(REQUIRED)}, got {','.join(header)}")
        has_targets = header[3:5] == list(TARGET_COLS)
        ncol = 5 if has_targets else 3
        if len(header) != ncol:
            raise SchemaError(f"{path}: unexpected columns {header[3:]}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != ncol:
                raise ParseError(path, lineno, header[min(len(row), ncol - 1)],
                                 f"expected {ncol} fields, found {len(row)}")
            rows.append([_number(v, path, lineno, header[c]) for c, v in enumerate(row)])
    if not rows:
        raise SchemaError(f"{path}: no samples")
    a = np.array(rows, dtype=float)
    t = a[:, 0]
    if np.isnan(t).any():
        bad = int(np.flatnonzero(np.isnan(t))[0]) + 2
        raise ParseError(path, bad, "t_ms", "timestamp is missing")
    if np.any(np.diff(t) < 0):
        bad = int(np.flatnonzero(np.diff(t) < 0)[0]) + 3
        raise ParseError(path, bad, "t_ms", "timestamps go backwards")
    if fs is None:
        dt = np.median(np.diff(t)) if len(t) > 1 else 1.0
        if not dt > 0:
            raise SchemaError(f"{path}: cannot infer sampling rate from timestamps")
        fs = round(1000.0 / dt, 6)
    targets = _targets(t, a[:, 3], a[:, 4]) if has_targets else None
    return Recording.from_arrays(a[:, 1], a[:, 2], fs, t=t, subject_id=entry.subject_id,
                                 session_id=entry.session_id, task_tag=entry.task_tag,
                                 targets=targets or None, meta={"source": str(path)})


def _targets(t, tx, ty):
    out = []
    prev = None
    for i in range(len(t)):
        cur = (tx[i], ty[i])
        if math.isnan(cur[0]) or math.isnan(cur[1]):
            prev = None
            continue
        if prev is None or cur != prev:
            out.append(TargetEvent(float(t[i]), float(cur[0]), float(cur[1]), len(out)))
        prev = cur
    return tuple(out)


def manifest(root, pattern: str = DEFAULT_FILENAME_PATTERN) -> list[ManifestEntry]:
    root = Path(root)
    if root.is_file():
        return [parse_name(root, pattern)]
    if not root.is_dir():
        raise IngestError(f"dataset path {root} does not exist")
    entries = [parse_name(p, pattern) for p in sorted(root.rglob("*.csv"))
               if re.search(pattern, p.name)]
    if not entries:
        raise IngestError(f"no files matching {pattern!r} under {root}")
    return entries


def ingest(root, pattern: str = DEFAULT_FILENAME_PATTERN, fs: Optional[float] = None):
    """Read every recording under ``root``. Returns (recordings, errors)."""
    recs, errors = [], []
    for entry in manifest(root, pattern):
        try:
            recs.append(read_recording(entry.path, entry, fs))
        except (IngestError, ValueError) as e:
            errors.append((entry.path, str(e)))
    return recs, errors
