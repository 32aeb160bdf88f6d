"""Input validation helpers shared by every computational module.

All kernels in this package operate on dense numpy arrays in NCHW layout
and refuse to broadcast: shape or dtype mismatches raise ValueError with
the offending shapes in the message instead of silently promoting.
"""

from __future__ import annotations

import numpy as np

FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


def ensure_float(x: np.ndarray, name: str = "x") -> np.ndarray:
    """Check that x is a float32 or float64 ndarray."""
    if not isinstance(x, np.ndarray):
        raise ValueError(f"{name} must be a numpy array, got {type(x).__name__}")
    if x.dtype not in FLOAT_DTYPES:
        raise ValueError(f"{name} must be float32 or float64, got dtype {x.dtype}")
    return x


def ensure_nchw(x: np.ndarray, name: str = "x", channels: int | None = None) -> np.ndarray:
    """Check that x is a 4-d float array in (N, C, H, W) layout."""
    ensure_float(x, name)
    if x.ndim != 4:
        raise ValueError(f"{name} must be 4-d (N, C, H, W), got shape {x.shape}")
    if channels is not None and x.shape[1] != channels:
        raise ValueError(
            f"{name} must have {channels} channels, got {x.shape[1]} (shape {x.shape})"
        )
    return x


def ensure_same_dtype(*pairs) -> None:
    """Check that all named arrays share one dtype.  pairs = (array, name), ..."""
    base = None
    base_name = None
    for arr, name in pairs:
        if base is None:
            base, base_name = arr.dtype, name
        elif arr.dtype != base:
            raise ValueError(
                f"dtype mismatch: {base_name} is {base} but {name} is {arr.dtype}"
            )


def ensure_same_shape(a: np.ndarray, b: np.ndarray, a_name: str = "a", b_name: str = "b") -> None:
    if a.shape != b.shape:
        raise ValueError(
            f"shape mismatch: {a_name} has {a.shape}, {b_name} has {b.shape}"
        )


def ensure_odd(value: int, name: str = "kernel width") -> int:
    if value < 1 or value % 2 == 0:
        raise ValueError(f"{name} must be a positive odd integer, got {value}")
    return value


def ensure_positive(value: int, name: str) -> int:
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return value
