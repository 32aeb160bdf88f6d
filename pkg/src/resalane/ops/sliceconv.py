"""1-d slice convolution with full channel mixing.

The kernel convolves along exactly one spatial axis, treating every
parallel slice independently but sharing the same weights.  A kernel
operating along W has shape (C, C, 1, w); one operating along H has
shape (C, C, w, 1).  "Same" zero padding keeps the spatial shape, and
the operation is cross-correlation (tap t reads offset t - (w-1)/2).
"""

from __future__ import annotations

import numpy as np

from ..validation import ensure_nchw, ensure_odd, ensure_same_dtype


def _split_kernel(x: np.ndarray, kernel: np.ndarray, axis: int):
    ensure_nchw(x, "x")
    if axis not in (2, 3):
        raise ValueError(f"axis must be 2 (H) or 3 (W), got {axis}")
    if kernel.ndim != 4:
        raise ValueError(f"kernel must be 4-d, got shape {kernel.shape}")
    c = x.shape[1]
    if kernel.shape[0] != c or kernel.shape[1] != c:
        raise ValueError(f"kernel channels {kernel.shape[:2]} do not match input C={c}")
    if axis == 3:
        if kernel.shape[2] != 1:
            raise ValueError(f"kernel for axis 3 must be (C, C, 1, w), got {kernel.shape}")
        taps = kernel.shape[3]
    else:
        if kernel.shape[3] != 1:
            raise ValueError(f"kernel for axis 2 must be (C, C, w, 1), got {kernel.shape}")
        taps = kernel.shape[2]
    ensure_odd(taps)
    ensure_same_dtype((x, "x"), (kernel, "kernel"))
    return kernel.reshape(c, c, taps), taps


def _pad(x: np.ndarray, axis: int, p: int) -> np.ndarray:
    spec = [(0, 0)] * 4
    spec[axis] = (p, p)
    return np.pad(x, spec)


def slice_conv1d_forward(x: np.ndarray, kernel: np.ndarray, axis: int = 3) -> np.ndarray:
    """Convolve (N, C, H, W) along `axis` with a (C, C, taps) mixing kernel."""
    k, taps = _split_kernel(x, kernel, axis)
    n, c, h, w = x.shape
    span = x.shape[axis]
    xp = _pad(x, axis, (taps - 1) // 2)
    acc = np.zeros((c, n, h, w), dtype=x.dtype)
    for t in range(taps):
        if axis == 3:
            sl = xp[:, :, :, t : t + span]
        else:
            sl = xp[:, :, t : t + span, :]
        # (C_out, C_in) x (N, C_in, H, W) contracted over C_in -> (C_out, N, H, W)
        acc += np.tensordot(k[:, :, t], sl, axes=[(1,), (1,)])
    return np.ascontiguousarray(acc.transpose(1, 0, 2, 3))


def slice_conv1d_backward(grad: np.ndarray, x: np.ndarray, kernel: np.ndarray,
                          axis: int = 3):
    """Returns (grad_x, grad_kernel) for slice_conv1d_forward."""
    k, taps = _split_kernel(x, kernel, axis)
    if grad.shape != x.shape:
        raise ValueError(f"grad shape {grad.shape} does not match input {x.shape}")
    n, c, h, w = x.shape
    span = x.shape[axis]
    p = (taps - 1) // 2
    xp = _pad(x, axis, p)

    gk = np.empty_like(k)
    gxp = np.zeros((c, n) + xp.shape[2:], dtype=x.dtype)
    for t in range(taps):
        if axis == 3:
            sl = xp[:, :, :, t : t + span]
        else:
            sl = xp[:, :, t : t + span, :]
        gk[:, :, t] = np.tensordot(grad, sl, axes=[(0, 2, 3), (0, 2, 3)])
        # (C_in, N, H, W) contribution into the padded input gradient
        back = np.tensordot(k[:, :, t], grad, axes=[(0,), (1,)])
        if axis == 3:
            gxp[:, :, :, t : t + span] += back
        else:
            gxp[:, :, t : t + span, :] += back

    if axis == 3:
        gx = gxp[:, :, :, p : p + span]
    else:
        gx = gxp[:, :, p : p + span, :]
    return np.ascontiguousarray(gx.transpose(1, 0, 2, 3)), gk.reshape(kernel.shape)
