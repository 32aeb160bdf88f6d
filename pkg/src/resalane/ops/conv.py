"""Dense 2-d convolution and the stride-2 transpose convolution.

conv2d is cross-correlation (no kernel flip) with zero padding, the
convention used throughout this package.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..validation import ensure_nchw, ensure_same_dtype


def _norm_pad(pad) -> tuple[int, int]:
    if isinstance(pad, int):
        return pad, pad
    ph, pw = pad
    return int(ph), int(pw)


def _check_conv_args(x, w, stride, pad):
    ensure_nchw(x, "x")
    if w.ndim != 4:
        raise ValueError(f"kernel must be 4-d (O, C, kh, kw), got {w.shape}")
    if w.shape[1] != x.shape[1]:
        raise ValueError(f"kernel expects {w.shape[1]} input channels, x has {x.shape[1]}")
    ensure_same_dtype((x, "x"), (w, "kernel"))
    ph, pw = _norm_pad(pad)
    if stride < 1 or ph < 0 or pw < 0:
        raise ValueError(f"invalid stride {stride} or pad {pad}")


def _out_size(size, k, stride, pad):
    out = (size + 2 * pad - k) // stride + 1
    if out < 1:
        raise ValueError(f"kernel size {k} too large for input size {size} with pad {pad}")
    return out


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None,
                   stride: int = 1, pad: int = 0) -> np.ndarray:
    """x (N, C, H, W), w (O, C, kh, kw) -> (N, O, Ho, Wo)."""
    _check_conv_args(x, w, stride, pad)
    ph, pw = _norm_pad(pad)
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    ho = _out_size(h, kh, stride, ph)
    wo = _out_size(wd, kw, stride, pw)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    win = win[:, :, :ho, :wo]
    y = np.tensordot(w, win, axes=[(1, 2, 3), (1, 4, 5)])
    y = np.ascontiguousarray(y.transpose(1, 0, 2, 3))
    if b is not None:
        if b.shape != (o,):
            raise ValueError(f"bias shape {b.shape} does not match {o} output channels")
        y += b[None, :, None, None]
    return y


def conv2d_backward(grad: np.ndarray, x: np.ndarray, w: np.ndarray,
                    stride: int = 1, pad: int = 0):
    """Returns (grad_x, grad_w, grad_b) for conv2d_forward."""
    _check_conv_args(x, w, stride, pad)
    ph, pw = _norm_pad(pad)
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    ho = _out_size(h, kh, stride, ph)
    wo = _out_size(wd, kw, stride, pw)
    if grad.shape != (n, o, ho, wo):
        raise ValueError(f"grad shape {grad.shape} does not match output {(n, o, ho, wo)}")

    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    win = win[:, :, :ho, :wo]
    gw = np.tensordot(grad, win, axes=[(0, 2, 3), (0, 2, 3)])
    gb = grad.sum(axis=(0, 2, 3))

    gxp = np.zeros_like(xp)
    for a in range(kh):
        for bb in range(kw):
            # (N, Ho, Wo, C) contribution of kernel tap (a, bb)
            contrib = np.tensordot(grad, w[:, :, a, bb], axes=[(1,), (0,)])
            gxp[:, :, a : a + stride * ho : stride, bb : bb + stride * wo : stride] += (
                contrib.transpose(0, 3, 1, 2)
            )
    gx = gxp[:, :, ph : ph + h, pw : pw + wd] if ph or pw else gxp
    return np.ascontiguousarray(gx), gw, gb


def transpose_conv2x_forward(x: np.ndarray, w: np.ndarray,
                             b: np.ndarray | None = None) -> np.ndarray:
    """Stride-2 transpose convolution with a 2x2 kernel, exactly doubling H and W.

    x (N, C, H, W), w (C, O, 2, 2) -> (N, O, 2H, 2W).  Each input pixel paints
    a disjoint 2x2 output patch, so no overlap handling is needed.
    """
    ensure_nchw(x, "x")
    if w.ndim != 4 or w.shape[2:] != (2, 2) or w.shape[0] != x.shape[1]:
        raise ValueError(f"kernel must be ({x.shape[1]}, O, 2, 2), got {w.shape}")
    ensure_same_dtype((x, "x"), (w, "kernel"))
    n, c, h, wd = x.shape
    o = w.shape[1]
    t = np.tensordot(x, w, axes=[(1,), (0,)])  # (N, H, W, O, 2, 2)
    y = t.transpose(0, 3, 1, 4, 2, 5).reshape(n, o, 2 * h, 2 * wd)
    y = np.ascontiguousarray(y)
    if b is not None:
        if b.shape != (o,):
            raise ValueError(f"bias shape {b.shape} does not match {o} output channels")
        y += b[None, :, None, None]
    return y


def transpose_conv2x_backward(grad: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Returns (grad_x, grad_w, grad_b) for transpose_conv2x_forward."""
    n, c, h, wd = x.shape
    o = w.shape[1]
    if grad.shape != (n, o, 2 * h, 2 * wd):
        raise ValueError(f"grad shape {grad.shape} does not match output {(n, o, 2 * h, 2 * wd)}")
    g6 = grad.reshape(n, o, h, 2, wd, 2).transpose(0, 2, 4, 1, 3, 5)  # (N, H, W, O, 2, 2)
    gx = np.tensordot(g6, w, axes=[(3, 4, 5), (1, 2, 3)])  # (N, H, W, C)
    gw = np.tensordot(x, g6, axes=[(0, 2, 3), (0, 1, 2)])  # (C, O, 2, 2)
    gb = grad.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(gx.transpose(0, 3, 1, 2)), gw, gb
