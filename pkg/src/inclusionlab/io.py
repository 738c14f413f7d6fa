"""Atomic file output and CSV/JSON formatting."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def _to_builtin(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_to_builtin) + "\n"


def write_atomic(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return write_atomic(path, dumps(obj))


def field_csv(points, values) -> str:
    """``x,y,value`` rows with 17 significant digits."""
    lines = ["x,y,value"]
    for (x, y), v in zip(np.asarray(points), np.asarray(values)):
        lines.append(f"{x:.17g},{y:.17g},{v:.17g}")
    return "\n".join(lines) + "\n"


def read_field_csv(path) -> np.ndarray:
    """Load an ``x,y,value`` file as an array of shape (n, 3)."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
