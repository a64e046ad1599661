"""Input checks shared by the public entry points."""
from __future__ import annotations

import numbers

import numpy as np


def check_processing_times(X) -> np.ndarray:
    """Return ``X`` as a 2-D integer array of non-negative processing times.

    Accepts nested sequences or arrays.  Float input is allowed only when
    every entry is integral.
    """
    try:
        arr = np.asarray(X)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"processing times not array-like: {exc}") from None
    if arr.ndim != 2:
        raise ValueError(f"processing times must be 2-D (jobs x machines), got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"need at least one job and one machine, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.isfinite(arr).all() or (arr != np.round(arr)).any():
            raise ValueError("processing times must be finite integers")
        arr = arr.astype(np.int64)
    elif arr.dtype.kind not in "iu":
        raise ValueError(f"processing times must be integers, got dtype {arr.dtype}")
    if (arr < 0).any():
        raise ValueError("processing times must be non-negative")
    if arr.max() > np.iinfo(np.int32).max:
        raise ValueError("processing time exceeds 32-bit range")
    return arr


def check_permutation(perm, n: int) -> tuple:
    perm = tuple(int(j) for j in perm)
    if len(perm) != n or sorted(perm) != list(range(n)):
        raise ValueError(f"not a permutation of 0..{n - 1}: {perm}")
    return perm


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
