"""Deterministic serialization of results.

All floats are round-tripped through a fixed 17-significant-digit decimal
form before JSON encoding, keys are sorted, and files are written atomically
(temporary file in the same directory, then rename), so identical inputs
produce byte-identical outputs regardless of platform dict ordering or
scheduling.
"""
from __future__ import annotations

import json
import os
import tempfile
from enum import Enum

import numpy as np

FLOAT_FORMAT = "%.17g"


def canonical_float(x: float) -> float:
    return float(FLOAT_FORMAT % float(x))


def canonical(value):
    """Recursively normalize a result tree for deterministic JSON encoding."""
    if isinstance(value, Enum):
        return canonical(value.value)
    if isinstance(value, dict):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    if isinstance(value, np.ndarray):
        return [canonical(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return canonical_float(float(value))
    return value


def json_text(obj) -> str:
    return json.dumps(canonical(obj), indent=2, sort_keys=True) + "\n"


def write_text_atomic(text: str, path: str) -> None:
    """Write text through a same-directory temporary file and an atomic rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(obj, path: str) -> None:
    write_text_atomic(json_text(obj), path)
