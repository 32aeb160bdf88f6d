"""Elementwise and dense kernels: relu, fully connected, softmax."""

from __future__ import annotations

import numpy as np

from ..validation import ensure_float, ensure_same_dtype


def relu_forward(x: np.ndarray) -> np.ndarray:
    ensure_float(x)
    return np.maximum(x, 0)


def relu_backward(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Subgradient at zero is taken as zero (strict positivity mask)."""
    if grad.shape != x.shape:
        raise ValueError(f"grad shape {grad.shape} does not match input {x.shape}")
    ensure_same_dtype((grad, "grad"), (x, "x"))
    return grad * (x > 0)


def fc_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """x (N, D) @ w (D, M) + b (M,)."""
    ensure_float(x)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"fc shapes incompatible: x {x.shape}, w {w.shape}")
    ensure_same_dtype((x, "x"), (w, "w"))
    y = x @ w
    if b is not None:
        if b.shape != (w.shape[1],):
            raise ValueError(f"bias shape {b.shape} does not match out dim {w.shape[1]}")
        y = y + b
    return y


def fc_backward(grad: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Returns (grad_x, grad_w, grad_b)."""
    if grad.shape != (x.shape[0], w.shape[1]):
        raise ValueError(f"grad shape {grad.shape} does not match output ({x.shape[0]}, {w.shape[1]})")
    gx = grad @ w.T
    gw = x.T @ grad
    gb = grad.sum(axis=0)
    return gx, gw, gb


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along one axis."""
    ensure_float(x)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Softmax over each row of a 2-d array."""
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {x.shape}")
    return softmax(x, axis=1)


def softmax_backward(grad: np.ndarray, y: np.ndarray, axis: int = -1) -> np.ndarray:
    """Backward given the forward output y = softmax(x)."""
    if grad.shape != y.shape:
        raise ValueError(f"grad shape {grad.shape} does not match output {y.shape}")
    inner = (grad * y).sum(axis=axis, keepdims=True)
    return y * (grad - inner)
