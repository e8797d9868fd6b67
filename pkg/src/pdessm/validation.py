"""Input validation helpers.

All array-taking entry points funnel through these checks so that shape and
finiteness errors surface as ``ValueError`` with a usable message instead of
propagating as downstream numpy surprises.  The array layout convention is
row-major ``(batch, channels, height, width)`` throughout.
"""

from __future__ import annotations

import numpy as np


def check_feature_map(u, name: str = "feature map") -> np.ndarray:
    """Validate and return a real rank-4 ``(B, C, H, W)`` array as float64."""
    arr = np.asarray(u)
    if arr.ndim != 4:
        raise ValueError(f"{name} must have shape (B, C, H, W), got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1 or arr.shape[3] < 1:
        raise ValueError(f"{name} has an empty axis: shape {arr.shape}")
    if np.iscomplexobj(arr):
        raise ValueError(f"{name} must be real valued")
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_spectrum_map(s, name: str = "spectrum map") -> np.ndarray:
    """Validate and return a complex rank-4 ``(B, C, H, W)`` array as complex128."""
    arr = np.asarray(s)
    if arr.ndim != 4:
        raise ValueError(f"{name} must have shape (B, C, H, W), got ndim={arr.ndim}")
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_square_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate a finite square 2D array; returns it as float64 or complex128."""
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    dtype = np.complex128 if np.iscomplexobj(arr) else np.float64
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_matrix(m, shape: tuple[int, int] | None = None, name: str = "matrix") -> np.ndarray:
    """Validate a finite real 2D array, optionally against an exact shape."""
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2D, got ndim={arr.ndim}")
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if np.iscomplexobj(arr):
        raise ValueError(f"{name} must be real valued")
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return int(value)
