"""Bilateral up-sampling decoder.

Each block doubles the spatial size and halves the channels through two
parallel branches fused by addition: a coarse branch (1x1 conv, batch
norm, bilinear 2x, relu) recovering the rough layout, and a fine branch
(2x2 stride-2 transpose conv, relu, then two factorized residual units)
recovering detail.  Three stacked blocks turn (N, C, H/8, W/8) into
(N, C/8, H, W).

The factorized residual unit chains 3x1 and 1x3 convolutions, each with
batch norm, with relu between them and around the residual sum; with all
conv kernels zero it degenerates to relu(x).
"""

from __future__ import annotations

import numpy as np

from .layers import (
    BatchNorm2d,
    Bilinear2x,
    Composite,
    Conv2d,
    Relu,
    Sequential,
    TransposeConv2x,
)
from .ops import relu_backward, relu_forward
from .validation import ensure_nchw


class NonBottleneck1d(Composite):
    """Factorized residual unit: (3x1, 1x3) x 2 with batch norms, residual add."""

    def __init__(self, channels: int, name: str, seed: int = 0, dtype=np.float32):
        super().__init__(name, dtype)
        def conv(idx, kh, kw):
            return Conv2d(f"{name}.conv{idx}", channels, channels, kh, kw,
                          pad=((kh - 1) // 2, (kw - 1) // 2), bias=False,
                          seed=seed, dtype=dtype)
        self.body = self._add_child(Sequential(f"{name}.body", [
            conv(0, 3, 1), BatchNorm2d(f"{name}.bn0", channels, dtype), Relu(f"{name}.relu0", dtype),
            conv(1, 1, 3), BatchNorm2d(f"{name}.bn1", channels, dtype), Relu(f"{name}.relu1", dtype),
            conv(2, 3, 1), BatchNorm2d(f"{name}.bn2", channels, dtype), Relu(f"{name}.relu2", dtype),
            conv(3, 1, 3), BatchNorm2d(f"{name}.bn3", channels, dtype),
        ], dtype))
        self._preact = None

    def forward(self, x, train):
        s = x + self.body.forward(x, train)
        self._preact = s
        return relu_forward(s)

    def backward(self, grad):
        gsum = relu_backward(grad, self._preact)
        gbody = self.body.backward(gsum)
        return gsum + gbody


class BilateralUpBlock(Composite):
    """One 2x up-sampling block with coarse and fine branches fused by add."""

    def __init__(self, c_in: int, c_out: int, name: str, seed: int = 0, dtype=np.float32):
        super().__init__(name, dtype)
        if c_out * 2 != c_in:
            raise ValueError(f"block must halve channels, got {c_in} -> {c_out}")
        self.coarse = self._add_child(Sequential(f"{name}.coarse", [
            Conv2d(f"{name}.coarse.0", c_in, c_out, 1, 1, bias=False, seed=seed, dtype=dtype),
            BatchNorm2d(f"{name}.coarse.1", c_out, dtype),
            Bilinear2x(f"{name}.coarse.2", dtype),
            Relu(f"{name}.coarse.3", dtype),
        ], dtype))
        self.fine = self._add_child(Sequential(f"{name}.fine", [
            TransposeConv2x(f"{name}.fine.0", c_in, c_out, bias=True, seed=seed, dtype=dtype),
            Relu(f"{name}.fine.1", dtype),
            NonBottleneck1d(c_out, f"{name}.fine.2", seed=seed, dtype=dtype),
            NonBottleneck1d(c_out, f"{name}.fine.3", seed=seed, dtype=dtype),
        ], dtype))

    def forward(self, x, train):
        ensure_nchw(x, "x")
        return self.coarse.forward(x, train) + self.fine.forward(x, train)

    def backward(self, grad):
        return self.coarse.backward(grad) + self.fine.backward(grad)


class BilateralDecoder(Composite):
    """Stack of halving blocks: (N, C, H, W) -> (N, C / 2^n, H * 2^n, W * 2^n)."""

    def __init__(self, c_in: int, num_blocks: int = 3, name: str = "busd",
                 seed: int = 0, dtype=np.float32):
        super().__init__(name, dtype)
        if c_in % (2 ** num_blocks) != 0:
            raise ValueError(
                f"input channels {c_in} not divisible by 2^{num_blocks}"
            )
        c = c_in
        for i in range(num_blocks):
            self._add_child(BilateralUpBlock(c, c // 2, f"{name}.{i}", seed=seed, dtype=dtype))
            c //= 2
        self.c_out = c

    def forward(self, x, train):
        for block in self.children:
            x = block.forward(x, train)
        return x

    def backward(self, grad):
        for block in reversed(self.children):
            grad = block.backward(grad)
        return grad
