"""Atomic file output: write to a temporary file in the target directory, then rename."""

import json
import os
import tempfile
from contextlib import contextmanager

import numpy as np

__all__ = ["atomic_open", "write_json", "to_jsonable"]


@contextmanager
def atomic_open(path, mode="w"):
    """Open a temporary sibling of ``path``; rename over ``path`` on success."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, encoding=None if "b" in mode else "utf-8") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_jsonable(x):
    """Convert numpy scalars/arrays, complex numbers and infinities for JSON."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [to_jsonable(float(x.real)), to_jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x != x:
            return "nan"
        if x in (float("inf"), float("-inf")):
            return "inf" if x > 0 else "-inf"
        return float(repr(x)) if abs(x) < 1e300 else x
    return x


def write_json(path, obj):
    with atomic_open(path) as fh:
        json.dump(to_jsonable(obj), fh, indent=2)
        fh.write("\n")
