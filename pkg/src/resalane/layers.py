"""Stateful layer wrappers around the functional kernels.

Each layer owns its parameters and gradient buffers under stable dotted
names, caches what its backward pass needs during forward, and returns
the input gradient from backward while accumulating parameter gradients.
Composites chain sublayers and expose merged parameter dicts.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .seeding import named_rng


class Layer:
    """Base: a named component with trainable params and non-trainable buffers."""

    def __init__(self, name: str, dtype=np.float32):
        self.name = name
        self.dtype = np.dtype(dtype)
        self._params: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}
        self._buffers: dict[str, np.ndarray] = {}

    def _add_param(self, leaf: str, array: np.ndarray) -> np.ndarray:
        key = f"{self.name}.{leaf}"
        self._params[key] = array
        self._grads[key] = np.zeros_like(array)
        return array

    def _add_buffer(self, leaf: str, array: np.ndarray) -> np.ndarray:
        self._buffers[f"{self.name}.{leaf}"] = array
        return array

    def params(self) -> dict[str, np.ndarray]:
        return dict(self._params)

    def grads(self) -> dict[str, np.ndarray]:
        return dict(self._grads)

    def buffers(self) -> dict[str, np.ndarray]:
        return dict(self._buffers)

    def zero_grads(self) -> None:
        for g in self._grads.values():
            g[...] = 0

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Composite(Layer):
    """A layer made of sublayers; parameter dicts merge across children."""

    def __init__(self, name: str, dtype=np.float32):
        super().__init__(name, dtype)
        self.children: list[Layer] = []

    def _add_child(self, layer: Layer) -> Layer:
        self.children.append(layer)
        return layer

    def params(self) -> dict[str, np.ndarray]:
        out = dict(self._params)
        for c in self.children:
            out.update(c.params())
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = dict(self._grads)
        for c in self.children:
            out.update(c.grads())
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out = dict(self._buffers)
        for c in self.children:
            out.update(c.buffers())
        return out

    def zero_grads(self) -> None:
        super().zero_grads()
        for c in self.children:
            c.zero_grads()


class Conv2d(Layer):
    def __init__(self, name: str, c_in: int, c_out: int, kh: int, kw: int,
                 stride: int = 1, pad=0, bias: bool = True,
                 seed: int = 0, dtype=np.float32):
        super().__init__(name, dtype)
        self.stride = stride
        self.pad = pad
        bound = (c_in * kh * kw) ** -0.5
        rng = named_rng(seed, f"{name}.weight")
        self.w = self._add_param(
            "weight", rng.uniform(-bound, bound, (c_out, c_in, kh, kw)).astype(self.dtype)
        )
        if bias:
            rngb = named_rng(seed, f"{name}.bias")
            self.b = self._add_param(
                "bias", rngb.uniform(-bound, bound, c_out).astype(self.dtype)
            )
        else:
            self.b = None
        self._x = None

    def forward(self, x, train):
        self._x = x
        return ops.conv2d_forward(x, self.w, self.b, self.stride, self.pad)

    def backward(self, grad):
        gx, gw, gb = ops.conv2d_backward(grad, self._x, self.w, self.stride, self.pad)
        self._grads[f"{self.name}.weight"] += gw
        if self.b is not None:
            self._grads[f"{self.name}.bias"] += gb
        return gx


class TransposeConv2x(Layer):
    def __init__(self, name: str, c_in: int, c_out: int, bias: bool = True,
                 seed: int = 0, dtype=np.float32):
        super().__init__(name, dtype)
        bound = (c_in * 4) ** -0.5
        rng = named_rng(seed, f"{name}.weight")
        self.w = self._add_param(
            "weight", rng.uniform(-bound, bound, (c_in, c_out, 2, 2)).astype(self.dtype)
        )
        if bias:
            rngb = named_rng(seed, f"{name}.bias")
            self.b = self._add_param(
                "bias", rngb.uniform(-bound, bound, c_out).astype(self.dtype)
            )
        else:
            self.b = None
        self._x = None

    def forward(self, x, train):
        self._x = x
        return ops.transpose_conv2x_forward(x, self.w, self.b)

    def backward(self, grad):
        gx, gw, gb = ops.transpose_conv2x_backward(grad, self._x, self.w)
        self._grads[f"{self.name}.weight"] += gw
        if self.b is not None:
            self._grads[f"{self.name}.bias"] += gb
        return gx


class BatchNorm2d(Layer):
    def __init__(self, name: str, channels: int, dtype=np.float32):
        super().__init__(name, dtype)
        self.gamma = self._add_param("gamma", np.ones(channels, dtype=self.dtype))
        self.beta = self._add_param("beta", np.zeros(channels, dtype=self.dtype))
        self.running_mean = self._add_buffer(
            "running_mean", np.zeros(channels, dtype=self.dtype))
        self.running_var = self._add_buffer(
            "running_var", np.ones(channels, dtype=self.dtype))
        self._cache = None

    def forward(self, x, train):
        y, self._cache = ops.batch_norm_forward(
            x, self.gamma, self.beta, self.running_mean, self.running_var, train
        )
        return y

    def backward(self, grad):
        gx, ggamma, gbeta = ops.batch_norm_backward(grad, self.gamma, self._cache)
        self._grads[f"{self.name}.gamma"] += ggamma
        self._grads[f"{self.name}.beta"] += gbeta
        return gx


class Relu(Layer):
    def __init__(self, name: str = "relu", dtype=np.float32):
        super().__init__(name, dtype)
        self._x = None

    def forward(self, x, train):
        self._x = x
        return ops.relu_forward(x)

    def backward(self, grad):
        return ops.relu_backward(grad, self._x)


class Bilinear2x(Layer):
    def __init__(self, name: str = "bilinear2x", dtype=np.float32):
        super().__init__(name, dtype)
        self._x = None

    def forward(self, x, train):
        self._x = x
        return ops.bilinear_upsample2x_forward(x)

    def backward(self, grad):
        return ops.bilinear_upsample2x_backward(grad, self._x)


class Linear(Layer):
    def __init__(self, name: str, d_in: int, d_out: int, seed: int = 0, dtype=np.float32):
        super().__init__(name, dtype)
        bound = d_in ** -0.5
        rng = named_rng(seed, f"{name}.weight")
        self.w = self._add_param(
            "weight", rng.uniform(-bound, bound, (d_in, d_out)).astype(self.dtype)
        )
        rngb = named_rng(seed, f"{name}.bias")
        self.b = self._add_param(
            "bias", rngb.uniform(-bound, bound, d_out).astype(self.dtype)
        )
        self._x = None

    def forward(self, x, train):
        self._x = x
        return ops.fc_forward(x, self.w, self.b)

    def backward(self, grad):
        gx, gw, gb = ops.fc_backward(grad, self._x, self.w)
        self._grads[f"{self.name}.weight"] += gw
        self._grads[f"{self.name}.bias"] += gb
        return gx


class Sequential(Composite):
    def __init__(self, name: str, layers: list[Layer], dtype=np.float32):
        super().__init__(name, dtype)
        for l in layers:
            self._add_child(l)

    def forward(self, x, train):
        for l in self.children:
            x = l.forward(x, train)
        return x

    def backward(self, grad):
        for l in reversed(self.children):
            grad = l.backward(grad)
        return grad
