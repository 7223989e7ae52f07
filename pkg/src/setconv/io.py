"""JSON file loading with validation errors that name the file and field."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import PointCloud


def load_json(path: str | Path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ValidationError(f"{p}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p}: invalid JSON at line {exc.lineno} column {exc.colno}") from None


def load_cloud(path: str | Path) -> PointCloud:
    try:
        return PointCloud.from_json(load_json(path))
    except ValidationError as exc:
        if str(exc).startswith(str(path)):
            raise
        raise ValidationError(f"{path}: {exc}") from None


def load_sample(path: str | Path) -> np.ndarray:
    """A list of reals, a list of points, or {"sample": [...]}."""
    obj = load_json(path)
    if isinstance(obj, dict):
        if "sample" not in obj:
            raise ValidationError(f"{path}: field 'sample' is missing")
        obj = obj["sample"]
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}: field 'sample' must hold numbers") from None
    if arr.ndim not in (1, 2) or arr.size == 0:
        raise ValidationError(f"{path}: field 'sample' must be a nonempty list of reals or points")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{path}: field 'sample' contains non-finite values")
    return arr
