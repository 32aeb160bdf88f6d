"""Central finite-difference gradient checking.

Every backward pass in the package is validated against central
differences in float64.  Relative error uses a floored denominator so
near-zero gradients are compared absolutely at the floor scale:

    err = max |analytic - numeric| / max(|analytic|, |numeric|, floor)

The default step 1e-4 and tolerance 1e-5 assume float64 and inputs of
order one; checks construct their own well-conditioned test points.
Deep composites use a smaller step: perturbing an early weight by 1e-4
moves downstream relu preactivations across their kinks, which biases
central differences even though each layer's backward is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-4
COMPOSITE_STEP = 1e-5
MODEL_STEP = 1e-6
DEFAULT_FLOOR = 1e-2
OP_TOL = 1e-5
MODEL_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    max_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_err < self.tol


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                step: float = DEFAULT_STEP) -> np.ndarray:
    """Full central-difference gradient of scalar f at x (float64)."""
    if x.dtype != np.float64:
        raise ValueError(f"finite differences require float64, got {x.dtype}")
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    if not np.shares_memory(flat, x):
        raise ValueError("input must be contiguous so perturbations reach the caller")
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return g


def fd_gradient_at(f: Callable[[np.ndarray], float], x: np.ndarray,
                   flat_indices, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central differences at selected flat indices; returns one value per index."""
    if x.dtype != np.float64:
        raise ValueError(f"finite differences require float64, got {x.dtype}")
    flat = x.reshape(-1)
    if not np.shares_memory(flat, x):
        raise ValueError("input must be contiguous so perturbations reach the caller")
    out = np.zeros(len(flat_indices))
    for j, i in enumerate(flat_indices):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        out[j] = (fp - fm) / (2.0 * step)
    return out


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray,
                floor: float = DEFAULT_FLOOR) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise ValueError(f"shape mismatch {analytic.shape} vs {numeric.shape}")
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))


def compare_sampled(f, x, analytic, rng, n_samples=8, step=DEFAULT_STEP,
                    floor=DEFAULT_FLOOR) -> float:
    """Max relative error on a random subset of coordinates of x."""
    size = x.size
    k = min(n_samples, size)
    idx = rng.choice(size, size=k, replace=False)
    numeric = fd_gradient_at(f, x, idx, step)
    return max_rel_err(analytic.reshape(-1)[idx], numeric, floor)


def _away_from_zero(x: np.ndarray, margin: float = 0.05) -> np.ndarray:
    """Push values out of the [-margin, margin] band so relu kinks are not hit."""
    sign = np.where(x >= 0, 1.0, -1.0)
    return x + sign * margin


# ---------------------------------------------------------------------------
# named checks backing the gradcheck CLI command


def _check_relu(rng) -> list[CheckResult]:
    from . import ops
    x = _away_from_zero(rng.standard_normal((2, 3, 4, 5)))
    g = rng.standard_normal(x.shape)
    analytic = ops.relu_backward(g, x)
    numeric = fd_gradient(lambda v: float((g * ops.relu_forward(v)).sum()), x)
    return [CheckResult("relu.x", max_rel_err(analytic, numeric), OP_TOL)]


def _check_fc(rng) -> list[CheckResult]:
    from . import ops
    x = rng.standard_normal((3, 4))
    w = rng.standard_normal((4, 6))
    b = rng.standard_normal(6)
    g = rng.standard_normal((3, 6))
    gx, gw, gb = ops.fc_backward(g, x, w)
    out = []
    for name, arr, analytic in (("x", x, gx), ("w", w, gw), ("b", b, gb)):
        numeric = fd_gradient(lambda v: float((g * ops.fc_forward(x, w, b)).sum()), arr)
        out.append(CheckResult(f"fc.{name}", max_rel_err(analytic, numeric), OP_TOL))
    return out


def _check_softmax(rng) -> list[CheckResult]:
    from . import ops
    x = rng.standard_normal((3, 7))
    g = rng.standard_normal(x.shape)
    y = ops.softmax(x)
    analytic = ops.softmax_backward(g, y)
    numeric = fd_gradient(lambda v: float((g * ops.softmax(v)).sum()), x)
    return [CheckResult("softmax.x", max_rel_err(analytic, numeric), OP_TOL)]


def _check_conv2d(rng) -> list[CheckResult]:
    from . import ops
    results = []
    for stride, pad in ((1, 1), (2, 1)):
        x = rng.standard_normal((2, 3, 6, 7))
        w = rng.standard_normal((4, 3, 3, 3)) * 0.5
        b = rng.standard_normal(4)
        y = ops.conv2d_forward(x, w, b, stride, pad)
        g = rng.standard_normal(y.shape)
        gx, gw, gb = ops.conv2d_backward(g, x, w, stride, pad)
        for name, arr, analytic in (("x", x, gx), ("w", w, gw), ("b", b, gb)):
            numeric = fd_gradient(
                lambda v: float((g * ops.conv2d_forward(x, w, b, stride, pad)).sum()), arr
            )
            results.append(CheckResult(
                f"conv2d.s{stride}.{name}", max_rel_err(analytic, numeric), OP_TOL
            ))
    return results


def _check_transpose_conv2x(rng) -> list[CheckResult]:
    from . import ops
    x = rng.standard_normal((2, 3, 4, 5))
    w = rng.standard_normal((3, 4, 2, 2)) * 0.5
    b = rng.standard_normal(4)
    y = ops.transpose_conv2x_forward(x, w, b)
    g = rng.standard_normal(y.shape)
    gx, gw, gb = ops.transpose_conv2x_backward(g, x, w)
    out = []
    for name, arr, analytic in (("x", x, gx), ("w", w, gw), ("b", b, gb)):
        numeric = fd_gradient(
            lambda v: float((g * ops.transpose_conv2x_forward(x, w, b)).sum()), arr
        )
        out.append(CheckResult(f"transpose_conv2x.{name}", max_rel_err(analytic, numeric), OP_TOL))
    return out


def _check_batch_norm(rng) -> list[CheckResult]:
    from . import ops
    results = []
    for train in (True, False):
        x = rng.standard_normal((3, 4, 5, 6)) * 1.5
        gamma = rng.standard_normal(4) * 0.5 + 1.0
        beta = rng.standard_normal(4)
        rm = rng.standard_normal(4) * 0.1
        rv = rng.random(4) + 0.5

        def run(xv, gv, bv):
            y, cache = ops.batch_norm_forward(xv, gv, bv, rm.copy(), rv.copy(), train)
            return y, cache

        y, cache = run(x, gamma, beta)
        g = rng.standard_normal(y.shape)
        gx, ggamma, gbeta = ops.batch_norm_backward(g, gamma, cache)
        mode = "train" if train else "infer"
        for name, arr, analytic in (("x", x, gx), ("gamma", gamma, ggamma), ("beta", beta, gbeta)):
            numeric = fd_gradient(lambda v: float((g * run(x, gamma, beta)[0]).sum()), arr)
            results.append(CheckResult(
                f"batch_norm.{mode}.{name}", max_rel_err(analytic, numeric), OP_TOL
            ))
    return results


def _check_bilinear(rng) -> list[CheckResult]:
    from . import ops
    x = rng.standard_normal((2, 3, 4, 5))
    y = ops.bilinear_upsample2x_forward(x)
    g = rng.standard_normal(y.shape)
    analytic = ops.bilinear_upsample2x_backward(g, x)
    numeric = fd_gradient(lambda v: float((g * ops.bilinear_upsample2x_forward(v)).sum()), x)
    return [CheckResult("bilinear_upsample2x.x", max_rel_err(analytic, numeric), OP_TOL)]


def _check_slice_conv(rng) -> list[CheckResult]:
    from . import ops
    results = []
    for axis, kshape in ((3, (4, 4, 1, 5)), (2, (4, 4, 3, 1))):
        x = rng.standard_normal((2, 4, 5, 6))
        k = rng.standard_normal(kshape) * 0.3
        g = rng.standard_normal(x.shape)
        gx, gk = ops.slice_conv1d_backward(g, x, k, axis)
        for name, arr, analytic in (("x", x, gx), ("kernel", k, gk)):
            numeric = fd_gradient(
                lambda v: float((g * ops.slice_conv1d_forward(x, k, axis)).sum()), arr
            )
            results.append(CheckResult(
                f"slice_conv1d.axis{axis}.{name}", max_rel_err(analytic, numeric), OP_TOL
            ))
    return results


def _check_resa(rng) -> list[CheckResult]:
    from .resa import ResaConfig, init_resa_params, resa_backward, resa_forward
    results = []
    for fusion in ("add", "max"):
        cfg = ResaConfig(iterations=2, kernel_width=3, directions="dulr", fusion=fusion)
        params = init_resa_params(3, cfg, seed=7, dtype=np.float64)
        x = _away_from_zero(rng.standard_normal((1, 3, 6, 7)), 0.02)
        y, caches = resa_forward(x, params, cfg)
        g = rng.standard_normal(y.shape)
        gx, gparams = resa_backward(g, caches, params, cfg)

        def loss_x(v):
            return float((g * resa_forward(v, params, cfg)[0]).sum())

        # iterations x directions chained relu passes form a deep composite
        results.append(CheckResult(
            f"resa.{fusion}.x",
            max_rel_err(gx, fd_gradient(loss_x, x, step=COMPOSITE_STEP)), OP_TOL
        ))
        worst = 0.0
        for name, arr in params.items():
            numeric = fd_gradient(
                lambda v: float((g * resa_forward(x, params, cfg)[0]).sum()), arr,
                step=COMPOSITE_STEP
            )
            worst = max(worst, max_rel_err(gparams[name], numeric))
        results.append(CheckResult(f"resa.{fusion}.kernels", worst, OP_TOL))
    return results


def _check_busd(rng) -> list[CheckResult]:
    from .decoder import BilateralUpBlock
    block = BilateralUpBlock(6, 3, seed=11, dtype=np.float64, name="busd.0")
    x = rng.standard_normal((2, 6, 4, 5))
    y = block.forward(x, train=True)
    g = rng.standard_normal(y.shape)
    block.zero_grads()
    gx = block.backward(g)
    block_grads = {k: v.copy() for k, v in block.grads().items()}

    def loss_for(_):
        return float((g * block.forward(x, train=True)).sum())

    results = []
    numeric = fd_gradient(lambda v: float((g * block.forward(v, train=True)).sum()), x,
                          step=COMPOSITE_STEP)
    results.append(CheckResult("busd.block.x", max_rel_err(gx, numeric), OP_TOL))
    worst = 0.0
    for name, arr in block.params().items():
        err = compare_sampled(loss_for, arr, block_grads[name], rng, n_samples=6,
                              step=COMPOSITE_STEP)
        worst = max(worst, err)
    results.append(CheckResult("busd.block.params", worst, OP_TOL))
    return results


def _check_model(rng) -> list[CheckResult]:
    from .network import LaneNetwork, ModelConfig
    cfg = ModelConfig(
        image_height=16, image_width=16, channels=(4, 8, 16),
        resa_iterations=2, resa_kernel_width=3, num_lanes=2,
        precision="f64",
    )
    net = LaneNetwork(cfg, seed=3)
    x = rng.standard_normal((2, 3, 16, 16)) * 0.5 + 0.5
    seg = rng.integers(0, cfg.num_lanes + 1, size=(2, 16, 16))
    exist = rng.integers(0, 2, size=(2, cfg.num_lanes)).astype(np.float64)

    def loss_only(_):
        out = net.forward(x, train=True)
        loss, _, _ = net.loss(out, seg, exist)
        return float(loss)

    out = net.forward(x, train=True)
    _, dseg, dexist = net.loss(out, seg, exist)
    net.zero_grads()
    net.backward(dseg, dexist)
    grads = {k: v.copy() for k, v in net.grads().items()}

    worst = 0.0
    for name, arr in net.params().items():
        err = compare_sampled(loss_only, arr, grads[name], rng, n_samples=4,
                              step=MODEL_STEP)
        worst = max(worst, err)
    return [CheckResult("model.end_to_end.params", worst, MODEL_TOL)]


SCOPES = {
    "tensor": [_check_relu, _check_fc, _check_softmax, _check_conv2d,
               _check_transpose_conv2x, _check_batch_norm, _check_bilinear,
               _check_slice_conv],
    "resa": [_check_resa],
    "busd": [_check_busd],
    "model": [_check_model],
}


def run_checks(scope: str, seed: int = 0) -> list[CheckResult]:
    if scope == "all":
        fns = [f for fs in SCOPES.values() for f in fs]
    elif scope in SCOPES:
        fns = SCOPES[scope]
    else:
        raise ValueError(f"unknown gradcheck scope {scope!r}, expected one of "
                         f"{sorted(SCOPES)} or 'all'")
    rng = np.random.default_rng(seed)
    results = []
    for fn in fns:
        results.extend(fn(rng))
    return results
