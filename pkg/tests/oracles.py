"""Independent naive reference implementations used to check the optimized
kernels.  Everything here is deliberately written as plain loops over
indices, straight from the operation definitions, and shares no code with
the package beyond numpy itself."""

import numpy as np


def conv2d_loops(x, k, stride=1, pad=0):
    """Direct quadruple-loop 2-d convolution (cross-correlation)."""
    n, c_in, h, w = x.shape
    c_out, c_in2, kh, kw = k.shape
    assert c_in == c_in2
    if isinstance(pad, int):
        ph = pw = pad
    else:
        ph, pw = pad
    xp = np.zeros((n, c_in, h + 2 * ph, w + 2 * pw), dtype=x.dtype)
    xp[:, :, ph:ph + h, pw:pw + w] = x
    oh = (h + 2 * ph - kh) // stride + 1
    ow = (w + 2 * pw - kw) // stride + 1
    y = np.zeros((n, c_out, oh, ow), dtype=x.dtype)
    for ni in range(n):
        for co in range(c_out):
            for oi in range(oh):
                for oj in range(ow):
                    acc = 0.0
                    for ci in range(c_in):
                        for ki in range(kh):
                            for kj in range(kw):
                                acc += (xp[ni, ci, oi * stride + ki, oj * stride + kj]
                                        * k[co, ci, ki, kj])
                    y[ni, co, oi, oj] = acc
    return y


def transpose_conv2x_loops(x, k, b=None):
    """Scatter-loop stride-2 transposed convolution with a 2x2 kernel.
    k has layout (C_in, C_out, 2, 2)."""
    n, c_in, h, w = x.shape
    c_in2, c_out, kh, kw = k.shape
    assert (c_in2, kh, kw) == (c_in, 2, 2)
    y = np.zeros((n, c_out, h * 2, w * 2), dtype=x.dtype)
    for ni in range(n):
        for ci in range(c_in):
            for i in range(h):
                for j in range(w):
                    v = x[ni, ci, i, j]
                    for co in range(c_out):
                        for ki in range(2):
                            for kj in range(2):
                                y[ni, co, 2 * i + ki, 2 * j + kj] += v * k[ci, co, ki, kj]
    if b is not None:
        y += b.reshape(1, c_out, 1, 1)
    return y


def fc_loops(x, w, b=None):
    n, d = x.shape
    d2, m = w.shape
    assert d == d2
    y = np.zeros((n, m), dtype=x.dtype)
    for ni in range(n):
        for mi in range(m):
            acc = 0.0
            for di in range(d):
                acc += x[ni, di] * w[di, mi]
            y[ni, mi] = acc + (b[mi] if b is not None else 0.0)
    return y


def slice_conv1d_loops(x, k, axis):
    """Slice convolution slice by slice with the quadruple-loop conv.

    axis 3: kernel (C, C, 1, w) slides along W, so every row is a
    (N, C, 1, W) slice convolved independently; axis 2: kernel
    (C, C, w, 1) slides along H over every column slice.
    """
    n, c, h, w = x.shape
    y = np.zeros_like(x)
    if axis == 3:
        kw = k.shape[3]
        assert k.shape[2] == 1
        for i in range(h):
            y[:, :, i:i + 1, :] = conv2d_loops(x[:, :, i:i + 1, :], k,
                                               stride=1, pad=(0, (kw - 1) // 2))
    else:
        kh = k.shape[2]
        assert k.shape[3] == 1
        for j in range(w):
            y[:, :, :, j:j + 1] = conv2d_loops(x[:, :, :, j:j + 1], k,
                                               stride=1, pad=((kh - 1) // 2, 0))
    return y


def bilinear_upsample2x_loops(x):
    """Half-pixel-center bilinear 2x upsampling, per output pixel."""
    n, c, h, w = x.shape
    y = np.zeros((n, c, 2 * h, 2 * w), dtype=x.dtype)
    for oi in range(2 * h):
        si = min(max((oi + 0.5) / 2.0 - 0.5, 0.0), h - 1)
        i0, fi = int(np.floor(si)), si - np.floor(si)
        i1 = min(i0 + 1, h - 1)
        for oj in range(2 * w):
            sj = min(max((oj + 0.5) / 2.0 - 0.5, 0.0), w - 1)
            j0, fj = int(np.floor(sj)), sj - np.floor(sj)
            j1 = min(j0 + 1, w - 1)
            y[:, :, oi, oj] = ((1 - fi) * (1 - fj) * x[:, :, i0, j0]
                               + (1 - fi) * fj * x[:, :, i0, j1]
                               + fi * (1 - fj) * x[:, :, i1, j0]
                               + fi * fj * x[:, :, i1, j1])
    return y


def batch_norm_loops(x, gamma, beta, running_mean, running_var, train, eps=1e-5):
    """Per-channel normalization; does not update running stats."""
    n, c, h, w = x.shape
    y = np.zeros_like(x)
    for ci in range(c):
        vals = x[:, ci]
        if train:
            mean = vals.mean()
            var = vals.var()
        else:
            mean = running_mean[ci]
            var = running_var[ci]
        y[:, ci] = gamma[ci] * (vals - mean) / np.sqrt(var + eps) + beta[ci]
    return y


def softmax_loops(x, axis):
    y = np.empty_like(x)
    ax = axis % x.ndim
    other = [s for i, s in enumerate(x.shape) if i != ax]
    for idx in np.ndindex(*other):
        slicer = list(idx)
        slicer.insert(ax, slice(None))
        row = x[tuple(slicer)]
        row = row - row.max()
        e = np.exp(row)
        y[tuple(slicer)] = e / e.sum()
    return y


def resa_unrolled(x, params, iterations, kernel_width, directions, fusion):
    """Literal unrolled aggregation: for each iteration and direction,
    build the shifted tensor slice by slice with explicit modular index
    arithmetic, convolve every slice with the direction's kernel, apply
    relu, and fuse.  Strides recomputed from the definition."""
    import math

    y = x.copy()
    for k in range(iterations):
        for d in directions:
            if d in ("d", "u"):
                length = y.shape[2]
            else:
                length = y.shape[3]
            s = max(1, math.ceil(length / 2 ** (iterations - k)))
            sign = 1 if d in ("u", "l") else -1
            shifted = np.empty_like(y)
            if d in ("d", "u"):
                for i in range(length):
                    shifted[:, :, i, :] = y[:, :, (i + sign * s) % length, :]
            else:
                for j in range(length):
                    shifted[:, :, :, j] = y[:, :, :, (j + sign * s) % length]
            kernel = params[f"resa.{d}.{k}.weight"]
            conv_axis = 3 if d in ("d", "u") else 2
            z = slice_conv1d_loops(shifted, kernel, conv_axis)
            r = np.maximum(z, 0)
            if fusion == "add":
                y = y + r
            else:
                y = np.where(r > y, r, y)
    return y


def scnn_sequential_loops(x, kernel, direction):
    """Sequential propagation: slices update in order, each one reading the
    already-updated predecessor.  Returns (y, steps)."""
    y = x.copy()
    n, c, h, w = x.shape
    steps = 0
    if direction in ("d", "u"):
        length, conv_axis = h, 3
    else:
        length, conv_axis = w, 2
    order = range(1, length) if direction in ("d", "r") else range(length - 2, -1, -1)
    for i in order:
        prev = i - 1 if direction in ("d", "r") else i + 1
        if direction in ("d", "u"):
            sl = y[:, :, prev:prev + 1, :]
        else:
            sl = y[:, :, :, prev:prev + 1]
        upd = np.maximum(slice_conv1d_loops(sl, kernel, conv_axis), 0)
        if direction in ("d", "u"):
            y[:, :, i:i + 1, :] += upd
        else:
            y[:, :, :, i:i + 1] += upd
        steps += 1
    return y, steps


def reachable_residues(strides, length):
    """Brute-force subset-sum reachability: all values (sum of any subset
    of strides) mod length."""
    reach = {0}
    for s in strides:
        reach |= {(r + s) % length for r in reach}
    return reach


def match_lanes_bruteforce(ious, iou_threshold):
    """Enumerate every maximal one-to-one assignment and keep the best by
    (clearing-pair count, total clearing IoU), lexicographically.  Partial
    matchings need no separate enumeration: each extends to a maximal one,
    and pairs below the threshold are filtered out afterwards."""
    from itertools import permutations

    n_pred, n_gt = ious.shape
    if n_pred == 0 or n_gt == 0:
        return []
    best_count, best_total, best_pairs = -1, -1.0, []
    if n_pred <= n_gt:
        candidates = ([(p, g) for p, g in zip(range(n_pred), perm)]
                      for perm in permutations(range(n_gt), n_pred))
    else:
        candidates = ([(p, g) for p, g in zip(perm, range(n_gt))]
                      for perm in permutations(range(n_pred), n_gt))
    for pairs in candidates:
        good = [(p, g) for p, g in pairs if ious[p, g] >= iou_threshold]
        count = len(good)
        total = sum(ious[p, g] for p, g in good)
        if (count, total) > (best_count, best_total):
            best_count, best_total, best_pairs = count, total, good
    return best_pairs
