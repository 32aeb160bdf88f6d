"""Bilinear 2x upsampling with half-pixel centers.

Output pixel i samples input coordinate i/2 - 0.25, clamped to the valid
range, so constant inputs stay constant and edges replicate.  The map is
linear, so it is materialized once per size as a small dense matrix and
applied with matrix products; the backward pass is the exact transpose.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..validation import ensure_nchw


@lru_cache(maxsize=64)
def _axis_matrix(n_in: int, dtype_str: str) -> np.ndarray:
    """(2*n_in, n_in) interpolation matrix for one axis."""
    m = np.zeros((2 * n_in, n_in), dtype=np.dtype(dtype_str))
    for i in range(2 * n_in):
        src = i / 2.0 - 0.25
        src = min(max(src, 0.0), n_in - 1.0)
        i0 = int(np.floor(src))
        f = src - i0
        i1 = min(i0 + 1, n_in - 1)
        m[i, i0] += 1.0 - f
        m[i, i1] += f
    return m


def bilinear_upsample2x_forward(x: np.ndarray) -> np.ndarray:
    """(N, C, H, W) -> (N, C, 2H, 2W)."""
    ensure_nchw(x, "x")
    rh = _axis_matrix(x.shape[2], x.dtype.str)
    rw = _axis_matrix(x.shape[3], x.dtype.str)
    t = np.tensordot(x, rh, axes=[(2,), (1,)])      # (N, C, W, 2H)
    t = t.transpose(0, 1, 3, 2)
    y = np.tensordot(t, rw, axes=[(3,), (1,)])      # (N, C, 2H, 2W)
    return np.ascontiguousarray(y)


def bilinear_upsample2x_backward(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Adjoint of the upsampling map, evaluated at grad (N, C, 2H, 2W)."""
    ensure_nchw(grad, "grad")
    n, c, h, w = x.shape
    if grad.shape != (n, c, 2 * h, 2 * w):
        raise ValueError(f"grad shape {grad.shape} does not match output {(n, c, 2 * h, 2 * w)}")
    rh = _axis_matrix(h, x.dtype.str)
    rw = _axis_matrix(w, x.dtype.str)
    t = np.tensordot(grad, rw, axes=[(3,), (0,)])   # (N, C, 2H, W)
    t = t.transpose(0, 1, 3, 2)                     # (N, C, W, 2H)
    gx = np.tensordot(t, rh, axes=[(3,), (0,)])     # (N, C, W, H)
    return np.ascontiguousarray(gx.transpose(0, 1, 3, 2))
