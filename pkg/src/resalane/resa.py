"""Recurrent feature-shift aggregation over a spatial feature map.

The operator runs K iterations.  Within an iteration, each configured
direction shifts the whole map by the iteration's stride along one spatial
axis (circular wrap), mixes channels with a 1-d slice convolution along the
other axis, applies ReLU, and fuses the result back into the map (residual
add by default, elementwise max as a variant).  Directions chain within an
iteration: each sees the map already updated by the previous direction.

Strides follow s_k = ceil(L / 2^(K-k)) for k = 0..K-1, so with
K = ceil(log2 L) the union of subset sums of strides covers every offset
mod L and each position can aggregate information from the entire axis.

Direction names follow the flow of information:

    "d"  top to bottom: position i fuses the slice at (i - s) mod H
    "u"  bottom to top: position i fuses the slice at (i + s) mod H
    "r"  left to right: position j fuses the slice at (j - s) mod W
    "l"  right to left: position j fuses the slice at (j + s) mod W

Vertical directions convolve along W (kernel (C, C, 1, w)); horizontal
directions convolve along H (kernel (C, C, w, 1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .ops import relu_forward, slice_conv1d_backward, slice_conv1d_forward
from .seeding import named_rng
from .validation import ensure_nchw, ensure_odd, ensure_positive

DIRECTIONS = "dulr"

# +1 gathers (i + s) mod L, -1 gathers (i - s) mod L
_SIGN = {"d": -1, "u": +1, "r": -1, "l": +1}
_SHIFT_AXIS = {"d": 2, "u": 2, "l": 3, "r": 3}
_CONV_AXIS = {"d": 3, "u": 3, "l": 2, "r": 2}

FUSIONS = ("add", "max")


@dataclass(frozen=True)
class ResaConfig:
    iterations: int = 4
    kernel_width: int = 9
    directions: str = "dulr"
    fusion: str = "add"

    def __post_init__(self):
        ensure_positive(self.iterations, "iterations")
        ensure_odd(self.kernel_width, "kernel width")
        if (not self.directions
                or any(c not in DIRECTIONS for c in self.directions)
                or len(set(self.directions)) != len(self.directions)):
            raise ValueError(
                f"directions must be a non-repeating subset of '{DIRECTIONS}', "
                f"got {self.directions!r}"
            )
        if self.fusion not in FUSIONS:
            raise ValueError(f"fusion must be one of {FUSIONS}, got {self.fusion!r}")


def compute_stride_schedule(length: int, iterations: int) -> list[int]:
    """Shift strides for one axis: s_k = ceil(length / 2^(iterations - k))."""
    ensure_positive(length, "axis length")
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    return [max(1, math.ceil(length / 2 ** (iterations - k))) for k in range(iterations)]


def circular_shift_gather(x: np.ndarray, axis: int, s: int, dir_sign: int) -> np.ndarray:
    """Gathering shift: out[..., i, ...] = x[..., (i + dir_sign * s) mod L, ...]."""
    if axis not in (2, 3):
        raise ValueError(f"axis must be 2 or 3, got {axis}")
    if dir_sign not in (1, -1):
        raise ValueError(f"dir_sign must be +1 or -1, got {dir_sign}")
    if s < 0:
        raise ValueError(f"shift must be >= 0, got {s}")
    return np.roll(x, -dir_sign * s, axis=axis)


def kernel_shape(direction: str, channels: int, width: int) -> tuple[int, ...]:
    if direction in ("d", "u"):
        return (channels, channels, 1, width)
    return (channels, channels, width, 1)


def param_name(direction: str, iteration: int) -> str:
    return f"resa.{direction}.{iteration}.weight"


def init_resa_params(channels: int, config: ResaConfig, seed: int = 0,
                     dtype=np.float32) -> dict[str, np.ndarray]:
    """Zero-centered uniform with bound (C*w)^(-1/2); no biases."""
    bound = (channels * config.kernel_width) ** -0.5
    params: dict[str, np.ndarray] = {}
    for k in range(config.iterations):
        for d in config.directions:
            name = param_name(d, k)
            shape = kernel_shape(d, channels, config.kernel_width)
            rng = named_rng(seed, name)
            params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return params


def directional_pass_forward(x: np.ndarray, kernel: np.ndarray, direction: str,
                             stride: int, fusion: str = "add"):
    """One shift + slice conv + relu + fuse step.  Returns (y, cache)."""
    if direction not in _SIGN:
        raise ValueError(f"unknown direction {direction!r}")
    ensure_positive(stride, "stride")
    shifted = circular_shift_gather(x, _SHIFT_AXIS[direction], stride, _SIGN[direction])
    z = slice_conv1d_forward(shifted, kernel, _CONV_AXIS[direction])
    r = relu_forward(z)
    if fusion == "add":
        y = x + r
    elif fusion == "max":
        # ties keep the residual input
        y = np.where(r > x, r, x)
    else:
        raise ValueError(f"fusion must be one of {FUSIONS}, got {fusion!r}")
    cache = (x, shifted, z, direction, stride, fusion)
    return y, cache


def directional_pass_backward(grad: np.ndarray, cache, kernel: np.ndarray):
    """Returns (grad_x, grad_kernel) for one directional pass."""
    x, shifted, z, direction, stride, fusion = cache
    if grad.shape != x.shape:
        raise ValueError(f"grad shape {grad.shape} does not match input {x.shape}")
    if fusion == "add":
        g_branch = grad
        g_residual = grad
    else:
        winner = relu_forward(z) > x
        g_branch = grad * winner
        g_residual = grad * ~winner
    gz = g_branch * (z > 0)
    gshifted, gkernel = slice_conv1d_backward(gz, shifted, kernel, _CONV_AXIS[direction])
    # adjoint of the gather is the inverse shift
    gx = g_residual + circular_shift_gather(gshifted, _SHIFT_AXIS[direction],
                                            stride, -_SIGN[direction])
    return gx, gkernel


def resa_forward(x: np.ndarray, params: dict[str, np.ndarray], config: ResaConfig):
    """Full operator.  Returns (y, caches); len(caches) equals the pass count."""
    ensure_nchw(x, "x")
    schedules = {
        2: compute_stride_schedule(x.shape[2], config.iterations),
        3: compute_stride_schedule(x.shape[3], config.iterations),
    }
    caches = []
    cur = x
    for k in range(config.iterations):
        for d in config.directions:
            stride = schedules[_SHIFT_AXIS[d]][k]
            cur, cache = directional_pass_forward(
                cur, params[param_name(d, k)], d, stride, config.fusion
            )
            caches.append((param_name(d, k), cache))
    return cur, caches


def resa_backward(grad: np.ndarray, caches, params: dict[str, np.ndarray],
                  config: ResaConfig):
    """Returns (grad_x, grad_params) for resa_forward."""
    grads = {name: np.zeros_like(arr) for name, arr in params.items()}
    g = grad
    for name, cache in reversed(caches):
        g, gkernel = directional_pass_backward(g, cache, params[name])
        grads[name] += gkernel
    return g, grads


def resa_pass_count(config: ResaConfig) -> int:
    """Directional passes per forward: iterations x directions."""
    return config.iterations * len(config.directions)


def scnn_reference_pass(x: np.ndarray, kernel: np.ndarray, direction: str):
    """Sequential slice-by-slice propagation in one direction.

    Slices are updated in order along the direction of flow, each fusing a
    relu-gated slice convolution of its already-updated predecessor, which
    is why one pass costs L - 1 dependent steps instead of a constant
    number of whole-map passes.  Returns (y, steps).
    """
    ensure_nchw(x, "x")
    if direction not in _SIGN:
        raise ValueError(f"unknown direction {direction!r}")
    axis = _SHIFT_AXIS[direction]
    conv_axis = _CONV_AXIS[direction]
    length = x.shape[axis]
    y = x.copy()
    forward_order = direction in ("d", "r")
    indices = range(1, length) if forward_order else range(length - 2, -1, -1)
    offset = -1 if forward_order else +1
    steps = 0
    for i in indices:
        if axis == 2:
            prev = y[:, :, i + offset : i + offset + 1, :]
            upd = relu_forward(slice_conv1d_forward(prev, kernel, conv_axis))
            y[:, :, i, :] += upd[:, :, 0, :]
        else:
            prev = y[:, :, :, i + offset : i + offset + 1]
            upd = relu_forward(slice_conv1d_forward(prev, kernel, conv_axis))
            y[:, :, :, i] += upd[:, :, :, 0]
        steps += 1
    return y, steps


def coverage_grid(length: int, iterations: int, axis: str = "h"):
    """Reachability of the operator itself, for inspection and tests.

    Runs a single direction with identity kernels on a unit impulse at
    position 0 and records which positions are nonzero after each
    iteration.  With the forward-flow directions used here the support
    after iteration k is exactly the subset sums of the first k strides
    mod L.  Returns (grid, strides) where grid[k, j] says position j
    holds information after iteration k.
    """
    if axis not in ("h", "v"):
        raise ValueError(f"axis must be 'h' or 'v', got {axis!r}")
    direction = "r" if axis == "h" else "d"
    cfg = ResaConfig(iterations=iterations, kernel_width=1,
                     directions=direction, fusion="add")
    if axis == "h":
        x = np.zeros((1, 1, 1, length), dtype=np.float64)
    else:
        x = np.zeros((1, 1, length, 1), dtype=np.float64)
    x.reshape(-1)[0] = 1.0
    identity = np.ones((1, 1, 1, 1), dtype=np.float64)
    strides = compute_stride_schedule(length, iterations)
    grid = np.zeros((iterations, length), dtype=bool)
    cur = x
    for k in range(iterations):
        cur, _ = directional_pass_forward(cur, identity, direction, strides[k], "add")
        grid[k] = (cur != 0).reshape(-1)
    return grid, strides


class ResaAggregator(TransformerMixin, BaseEstimator):
    """Shape-preserving feature transform applying the aggregation operator.

    fit() samples the directional kernels for the incoming channel count;
    transform() applies the operator.  Parameters follow the estimator
    convention, so the transformer composes with sklearn pipelines.
    """

    def __init__(self, iterations: int = 4, kernel_width: int = 9,
                 directions: str = "dulr", fusion: str = "add",
                 random_state: int = 0):
        self.iterations = iterations
        self.kernel_width = kernel_width
        self.directions = directions
        self.fusion = fusion
        self.random_state = random_state

    def _config(self) -> ResaConfig:
        return ResaConfig(iterations=self.iterations, kernel_width=self.kernel_width,
                          directions=self.directions, fusion=self.fusion)

    def fit(self, X, y=None):
        X = ensure_nchw(np.asarray(X), "X")
        cfg = self._config()
        self.n_channels_ = X.shape[1]
        self.params_ = init_resa_params(self.n_channels_, cfg,
                                        seed=self.random_state, dtype=X.dtype)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise NotFittedError("ResaAggregator must be fitted before transform")
        X = ensure_nchw(np.asarray(X), "X", channels=self.n_channels_)
        params = self.params_
        if X.dtype != next(iter(params.values())).dtype:
            raise ValueError(
                f"X dtype {X.dtype} does not match fitted parameter dtype; "
                "refit or cast the input explicitly"
            )
        y, _ = resa_forward(X, params, self._config())
        return y
