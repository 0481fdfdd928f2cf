"""JSON helpers. Complex numbers travel as ``[re, im]`` pairs."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np


def complex_to_json(arr: Any) -> Any:
    """Nested lists of ``[re, im]`` pairs, same nesting as ``arr``."""
    a = np.asarray(arr, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [complex_to_json(x) for x in a]


def complex_from_json(obj: Any) -> np.ndarray:
    def conv(x: Any) -> Any:
        if (
            isinstance(x, (list, tuple))
            and len(x) == 2
            and all(isinstance(v, (int, float)) for v in x)
        ):
            return complex(x[0], x[1])
        if isinstance(x, (list, tuple)):
            return [conv(v) for v in x]
        raise ValueError(f"expected [re, im] pair or list, got {x!r}")

    return np.asarray(conv(obj), dtype=complex)


def to_jsonable(obj: Any) -> Any:
    """Recursively turn numpy scalars/arrays and dataclass dicts into JSON types.

    Real arrays become plain nested lists; complex arrays use ``[re, im]``.
    Non-finite floats become ``None`` so the output is strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return complex_to_json(obj)
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def dump_json(obj: Any, path: str | Path | None = None) -> str:
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
