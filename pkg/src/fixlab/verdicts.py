"""Structured check outcomes and their JSON form."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class Verdict:
    """Outcome of a single named check.

    ``witness`` carries whatever concrete object refutes (or anchors) the
    check: a point, a pair, an orbit summary.  ``details`` holds the
    check-specific numbers; everything in it must survive ``to_jsonable``.
    """

    check: str
    holds: bool
    witness: Any = None
    details: dict[str, Any] = field(default_factory=dict)


def to_jsonable(obj: Any) -> Any:
    """Recursively convert dataclasses / numpy values into JSON-ready data."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return str(obj)
