"""CSV and JSON serialization of sample paths."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import MalformedRow, NonUniformGrid
from .simulate import SamplePath

GRID_RTOL = 1e-9


def fmt(v: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(v), ".17g")


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_path_csv(path: SamplePath, csv_path, meta: dict | None = None) -> Path:
    """Write t,x[,x_cont,jump_count] rows plus a JSON sidecar; return the sidecar path."""
    csv_path = Path(csv_path)
    has_truth = path.x_cont is not None and path.jump_counts is not None
    t = path.t
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "x_cont", "jump_count"] if has_truth else ["t", "x"])
        for j in range(path.n + 1):
            row = [fmt(t[j]), fmt(path.x[j])]
            if has_truth:
                row += [fmt(path.x_cont[j]), "" if j == 0 else str(int(path.jump_counts[j - 1]))]
            w.writerow(row)
    side = sidecar_path(csv_path)
    doc = dict(meta or {})
    doc["jump_marks"] = [
        {"time": float(tm), "size": float(sz), "effect": float(ef)}
        for tm, sz, ef in zip(path.jump_times, path.jump_sizes, path.jump_effects)
    ]
    side.write_text(json.dumps(doc, indent=2) + "\n")
    return side


def read_path_csv(csv_path) -> SamplePath:
    """Read a path file; infers h and checks the grid is uniform."""
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise MalformedRow(1, "empty file") from None
        if header[:2] != ["t", "x"] or len(header) not in (2, 4) or (
            len(header) == 4 and header[2:] != ["x_cont", "jump_count"]
        ):
            raise MalformedRow(1, f"expected header t,x[,x_cont,jump_count], got {','.join(header)}")
        width = len(header)
        t, x, xc, counts = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise MalformedRow(lineno, f"expected {width} fields, got {len(row)}")
            try:
                t.append(float(row[0]))
                x.append(float(row[1]))
                if width == 4:
                    xc.append(float(row[2]))
                    if len(t) > 1:
                        counts.append(int(row[3]))
                    elif row[3].strip():
                        raise ValueError("first row must leave jump_count empty")
            except ValueError as exc:
                raise MalformedRow(lineno, str(exc)) from None
            if not (math.isfinite(t[-1]) and math.isfinite(x[-1])):
                raise MalformedRow(lineno, "non-finite value")
    if len(t) < 2:
        raise MalformedRow(len(t) + 1, "need at least two observations")
    t = np.array(t)
    steps = np.diff(t)
    h = (t[-1] - t[0]) / (len(t) - 1)
    if not h > 0 or np.any(np.abs(steps - h) > GRID_RTOL * h):
        worst = int(np.argmax(np.abs(steps - h)))
        raise NonUniformGrid(f"time grid is not uniform near row {worst + 2} (inferred h={h!r})")
    return SamplePath(
        x=np.array(x),
        h=float(h),
        x_cont=np.array(xc) if xc else None,
        jump_counts=np.array(counts, dtype=np.int64) if xc else None,
    )


def read_sidecar(csv_path) -> dict | None:
    side = sidecar_path(csv_path)
    if side.exists():
        return json.loads(side.read_text())
    return None


def read_retained(spec: str, n: int):
    """``all`` or a file of 1-based interval numbers (JSON list or one per line)."""
    if spec == "all":
        return None
    text = Path(spec).read_text().strip()
    if text.startswith("["):
        values = json.loads(text)
    else:
        values = [int(tok) for tok in text.replace(",", " ").split()]
    values = [int(v) for v in values]
    if any(v < 1 or v > n for v in values):
        raise ValueError(f"retained interval numbers must lie in 1..{n}")
    return sorted(set(values))
