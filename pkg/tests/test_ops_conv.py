import numpy as np
import pytest

from resalane.gradcheck import OP_TOL, fd_gradient, max_rel_err
from resalane.ops import (
    conv2d_backward,
    conv2d_forward,
    transpose_conv2x_backward,
    transpose_conv2x_forward,
)

from oracles import conv2d_loops, transpose_conv2x_loops


def test_conv2d_matches_loop_oracle_reference_case():
    rng = np.random.default_rng(42)
    x = rng.standard_normal((2, 3, 5, 7)).astype(np.float32)
    k = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
    y = conv2d_forward(x, k, stride=1, pad=1)
    ref = conv2d_loops(x, k, stride=1, pad=1)
    assert y.shape == ref.shape
    assert np.max(np.abs(y - ref)) < 1e-6


@pytest.mark.parametrize("case", range(20))
def test_conv2d_matches_loop_oracle_random(case):
    rng = np.random.default_rng(1000 + case)
    n = int(rng.integers(1, 3))
    c_in = int(rng.integers(1, 4))
    c_out = int(rng.integers(1, 4))
    kh, kw = (int(v) for v in rng.integers(1, 4, size=2))
    stride = int(rng.integers(1, 3))
    pad = int(rng.integers(0, 2))
    h = int(rng.integers(kh, kh + 5))
    w = int(rng.integers(kw, kw + 5))
    x = rng.standard_normal((n, c_in, h, w)).astype(np.float32)
    k = rng.standard_normal((c_out, c_in, kh, kw)).astype(np.float32)
    y = conv2d_forward(x, k, stride=stride, pad=pad)
    ref = conv2d_loops(x, k, stride=stride, pad=pad)
    assert y.shape == ref.shape
    assert np.max(np.abs(y - ref)) < 1e-6


def test_conv2d_asymmetric_padding_matches_oracle():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((1, 2, 6, 5)).astype(np.float32)
    k = rng.standard_normal((2, 2, 3, 1)).astype(np.float32)
    y = conv2d_forward(x, k, stride=1, pad=(1, 0))
    ref = conv2d_loops(x, k, stride=1, pad=(1, 0))
    assert y.shape == x.shape
    assert np.max(np.abs(y - ref)) < 1e-6


def test_conv2d_output_shape_formula():
    x = np.zeros((1, 1, 10, 11), dtype=np.float32)
    k = np.zeros((2, 1, 3, 3), dtype=np.float32)
    assert conv2d_forward(x, k, stride=2, pad=1).shape == (1, 2, 5, 6)
    assert conv2d_forward(x, k, stride=1, pad=0).shape == (1, 2, 8, 9)


def test_conv2d_rejects_bad_shapes():
    x = np.zeros((1, 2, 4, 4), dtype=np.float32)
    k = np.zeros((3, 5, 3, 3), dtype=np.float32)  # channel mismatch
    with pytest.raises(ValueError):
        conv2d_forward(x, k, stride=1, pad=1)
    with pytest.raises(ValueError):
        conv2d_forward(np.zeros((4, 4), dtype=np.float32),
                       np.zeros((1, 1, 3, 3), dtype=np.float32), 1, 1)


@pytest.mark.parametrize("stride,pad", [(1, 1), (2, 0), (2, 1)])
def test_conv2d_gradients(stride, pad):
    rng = np.random.default_rng(3)
    x = rng.standard_normal((2, 2, 6, 5))
    k = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    y = conv2d_forward(x, k, b, stride=stride, pad=pad)
    g = rng.standard_normal(y.shape)
    gx, gk, gb = conv2d_backward(g, x, k, stride=stride, pad=pad)

    def loss(v):
        return float((g * conv2d_forward(x, k, b, stride=stride, pad=pad)).sum())

    assert max_rel_err(gx, fd_gradient(loss, x)) < OP_TOL
    assert max_rel_err(gk, fd_gradient(loss, k)) < OP_TOL
    assert max_rel_err(gb, fd_gradient(loss, b)) < OP_TOL


def test_transpose_conv2x_matches_scatter_oracle():
    rng = np.random.default_rng(11)
    for case in range(20):
        crng = np.random.default_rng(2000 + case)
        n = int(crng.integers(1, 3))
        c_in = int(crng.integers(1, 4))
        c_out = int(crng.integers(1, 4))
        h, w = (int(v) for v in crng.integers(2, 7, size=2))
        x = crng.standard_normal((n, c_in, h, w)).astype(np.float32)
        k = crng.standard_normal((c_in, c_out, 2, 2)).astype(np.float32)
        b = crng.standard_normal(c_out).astype(np.float32)
        y = transpose_conv2x_forward(x, k, b)
        ref = transpose_conv2x_loops(x, k, b)
        assert y.shape == (n, c_out, 2 * h, 2 * w)
        assert np.max(np.abs(y - ref)) < 1e-6
    del rng


def test_transpose_conv2x_inverts_downsampling_shape():
    x = np.zeros((1, 8, 12, 20), dtype=np.float32)
    k = np.zeros((8, 4, 2, 2), dtype=np.float32)
    assert transpose_conv2x_forward(x, k).shape == (1, 4, 24, 40)


def test_transpose_conv2x_gradients():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((2, 3, 4, 5))
    k = rng.standard_normal((3, 2, 2, 2))
    b = rng.standard_normal(2)
    y = transpose_conv2x_forward(x, k, b)
    g = rng.standard_normal(y.shape)
    gx, gk, gb = transpose_conv2x_backward(g, x, k)

    def loss(v):
        return float((g * transpose_conv2x_forward(x, k, b)).sum())

    assert max_rel_err(gx, fd_gradient(loss, x)) < OP_TOL
    assert max_rel_err(gk, fd_gradient(loss, k)) < OP_TOL
    assert max_rel_err(gb, fd_gradient(loss, b)) < OP_TOL
