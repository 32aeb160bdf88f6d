"""Per-channel batch normalization over (N, H, W)."""

from __future__ import annotations

import numpy as np

from ..validation import ensure_nchw

EPS = 1e-5


def batch_norm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                       running_mean: np.ndarray, running_var: np.ndarray,
                       train: bool, momentum: float = 0.1, eps: float = EPS):
    """Returns (y, cache).  In train mode the running stats are updated in place
    with the biased batch statistics; in inference mode they are consumed."""
    ensure_nchw(x, "x")
    c = x.shape[1]
    for name, arr in (("gamma", gamma), ("beta", beta),
                      ("running_mean", running_mean), ("running_var", running_var)):
        if arr.shape != (c,):
            raise ValueError(f"{name} must have shape ({c},), got {arr.shape}")
    if train:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean = running_mean
        var = running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    cache = (xhat, inv_std, train)
    return y.astype(x.dtype, copy=False), cache


def batch_norm_backward(grad: np.ndarray, gamma: np.ndarray, cache):
    """Returns (grad_x, grad_gamma, grad_beta)."""
    xhat, inv_std, train = cache
    if grad.shape != xhat.shape:
        raise ValueError(f"grad shape {grad.shape} does not match input {xhat.shape}")
    ggamma = (grad * xhat).sum(axis=(0, 2, 3))
    gbeta = grad.sum(axis=(0, 2, 3))
    gxhat = grad * gamma[None, :, None, None]
    if not train:
        return gxhat * inv_std[None, :, None, None], ggamma, gbeta
    # d/dx of ((x - mean)/std) with mean and var functions of x
    term = gxhat - gxhat.mean(axis=(0, 2, 3), keepdims=True) \
        - xhat * (gxhat * xhat).mean(axis=(0, 2, 3), keepdims=True)
    gx = term * inv_std[None, :, None, None]
    return gx, ggamma, gbeta
