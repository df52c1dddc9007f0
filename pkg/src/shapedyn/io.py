"""Reading and writing contour sequences, tables and JSON artifacts."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeDynError

FLOAT_FMT = "%.17g"


@dataclass
class RawSequence:
    id: str
    label: str | None
    frames: list  # list of (n_i, 2) arrays, vertex counts may differ

    def __len__(self):
        return len(self.frames)


def _fail(msg, path):
    raise ShapeDynError(msg, module="io", operation="read_sequence", item_id=str(path))


def read_sequence(path) -> RawSequence:
    """Load a contour sequence from JSON or CSV (``frame,x,y``)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            _fail(f"invalid JSON: {exc}", path)
        if "frames" not in doc:
            _fail("missing 'frames'", path)
        frames = [np.asarray(f, dtype=float) for f in doc["frames"]]
        seq = RawSequence(str(doc.get("sequence_id") or path.stem), doc.get("label"), frames)
    elif path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or not {"frame", "x", "y"} <= set(rows[0]):
            _fail("CSV needs columns frame,x,y", path)
        by_frame: dict[int, list] = {}
        for r in rows:
            by_frame.setdefault(int(r["frame"]), []).append((float(r["x"]), float(r["y"])))
        frames = [np.array(by_frame[k]) for k in sorted(by_frame)]
        seq = RawSequence(path.stem, rows[0].get("label") or None, frames)
    else:
        _fail(f"unsupported file type {path.suffix!r}", path)
    for t, f in enumerate(seq.frames):
        if f.ndim != 2 or f.shape[1] != 2:
            _fail(f"frame {t} is not a list of [x, y] points", path)
    return seq


def write_sequence(path, seq_id: str, frames, label=None) -> Path:
    path = Path(path)
    doc = {"sequence_id": seq_id, "label": label,
           "frames": [np.asarray(f, dtype=float).tolist() for f in frames]}
    path.write_text(json.dumps(doc))
    return path


def find_sequences(inputs) -> list[Path]:
    """Expand files and directories into a sorted list of sequence files."""
    out = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in (".json", ".csv")))
        elif p.exists():
            out.append(p)
        else:
            raise ShapeDynError(f"no such file or directory: {p}", module="io",
                                operation="find_sequences", item_id=str(p))
    return out


def write_table(path, header, rows) -> Path:
    """CSV with full-precision floats, so reruns are byte-identical."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([FLOAT_FMT % v if isinstance(v, (float, np.floating)) else v
                        for v in row])
    return path


def write_matrix(path, matrix, header=None, index=None) -> Path:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    head = list(header) if header is not None else [f"c{i}" for i in range(matrix.shape[1])]
    if index is not None:
        head = ["id"] + head
        rows = [[idx] + list(map(float, row)) for idx, row in zip(index, matrix)]
    else:
        rows = [list(map(float, row)) for row in matrix]
    return write_table(path, head, rows)


def read_matrix(path) -> tuple[list, np.ndarray]:
    """Inverse of :func:`write_matrix` with an id column; returns ``(ids, values)``."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    if rows[0] and rows[0][0] == "id":
        return [r[0] for r in body], np.array([[float(v) for v in r[1:]] for r in body])
    return [], np.array([[float(v) for v in r] for r in body])


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))
    return path


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def read_json(path):
    return json.loads(Path(path).read_text())


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
