"""Microbenchmark: recurrent aggregation vs sequential slice propagation.

Both methods run on the same feature map with the same slice-convolution
machinery.  The aggregation method applies iterations x directions
whole-map passes; the sequential baseline sweeps each direction slice by
slice, every update depending on the previous one, which is the paper's
argument for the speedup on parallel hardware.  Wall times here are
hardware-specific; the counters and flop estimates are exact.

BLAS threads are pinned (single thread by default) so measurements are
stable; raising threads enables the vectorized passes to parallelize
inside the BLAS while the sequential baseline's tiny per-slice products
cannot, which is the parallel mode of the harness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, fields

import numpy as np
from threadpoolctl import threadpool_limits

from .resa import (
    ResaConfig,
    init_resa_params,
    kernel_shape,
    resa_forward,
    resa_pass_count,
    scnn_reference_pass,
    compute_stride_schedule,
)
from .seeding import named_rng

METHODS = ("resa", "scnn_seq")
_SHIFT_AXIS = {"d": 2, "u": 2, "l": 3, "r": 3}


@dataclass
class BenchResult:
    method: str
    width: int       # kernel width
    C: int
    H: int
    W: int
    passes: int
    median_ms: float
    iqr_ms: float
    flops: float


CSV_COLUMNS = [f.name for f in fields(BenchResult)]


def resa_flops(config: ResaConfig, c: int, h: int, w: int, n: int = 1) -> float:
    """2 * N * C^2 * kernel_width * H * W multiply-adds per directional pass."""
    per_pass = 2.0 * n * c * c * config.kernel_width * h * w
    return per_pass * resa_pass_count(config)


def scnn_flops(config: ResaConfig, c: int, h: int, w: int, n: int = 1) -> float:
    """Sum over directions of steps * per-slice conv cost."""
    total = 0.0
    for d in config.directions:
        if _SHIFT_AXIS[d] == 2:
            steps, slice_elems = h - 1, w
        else:
            steps, slice_elems = w - 1, h
        total += 2.0 * n * c * c * config.kernel_width * slice_elems * steps
    return total


def scnn_step_count(config: ResaConfig, h: int, w: int) -> int:
    return sum((h - 1) if _SHIFT_AXIS[d] == 2 else (w - 1) for d in config.directions)


def _time_runs(fn, warmup: int, repeats: int):
    for _ in range(warmup):
        fn()
    times = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        fn()
        times[i] = time.perf_counter() - t0
    ms = times * 1e3
    q1, med, q3 = np.percentile(ms, [25, 50, 75])
    return float(med), float(q3 - q1)


def run_bench(channels: int, height: int, width: int, kernel_width: int = 9,
              iterations: int = 4, directions: str = "dulr",
              warmup: int = 5, repeats: int = 30, threads: int = 1,
              methods=METHODS, seed: int = 0, batch: int = 1) -> list[BenchResult]:
    if warmup < 5 or repeats < 30:
        raise ValueError("benchmark requires warmup >= 5 and repeats >= 30")
    cfg = ResaConfig(iterations=iterations, kernel_width=kernel_width,
                     directions=directions)
    rng = named_rng(seed, "bench.input")
    x = rng.standard_normal((batch, channels, height, width)).astype(np.float32)
    params = init_resa_params(channels, cfg, seed=seed, dtype=np.float32)
    bound = (channels * kernel_width) ** -0.5
    scnn_kernels = {
        d: named_rng(seed, f"bench.scnn.{d}").uniform(
            -bound, bound, kernel_shape(d, channels, kernel_width)
        ).astype(np.float32)
        for d in directions
    }

    def run_resa():
        resa_forward(x, params, cfg)

    def run_scnn():
        y = x
        for d in directions:
            y, _ = scnn_reference_pass(y, scnn_kernels[d], d)

    results = []
    with threadpool_limits(limits=threads):
        for method in methods:
            if method == "resa":
                med, iqr = _time_runs(run_resa, warmup, repeats)
                results.append(BenchResult(
                    "resa", kernel_width, channels, height, width,
                    resa_pass_count(cfg), med, iqr,
                    resa_flops(cfg, channels, height, width, batch),
                ))
            elif method == "scnn_seq":
                med, iqr = _time_runs(run_scnn, warmup, repeats)
                results.append(BenchResult(
                    "scnn_seq", kernel_width, channels, height, width,
                    scnn_step_count(cfg, height, width), med, iqr,
                    scnn_flops(cfg, channels, height, width, batch),
                ))
            else:
                raise ValueError(f"unknown method {method!r}, expected {METHODS}")
    return results


def write_bench_csv(results, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(CSV_COLUMNS) + "\n")
        for r in results:
            f.write(",".join(str(getattr(r, c)) for c in CSV_COLUMNS) + "\n")


def read_bench_csv(path) -> list[BenchResult]:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {header}")
        out = []
        for line in f:
            if not line.strip():
                continue
            raw = dict(zip(CSV_COLUMNS, line.strip().split(",")))
            out.append(BenchResult(
                method=raw["method"], width=int(raw["width"]), C=int(raw["C"]),
                H=int(raw["H"]), W=int(raw["W"]), passes=int(raw["passes"]),
                median_ms=float(raw["median_ms"]), iqr_ms=float(raw["iqr_ms"]),
                flops=float(raw["flops"]),
            ))
        return out


def format_bench_table(results) -> str:
    header = f"{'method':<10} {'w':>3} {'C':>4} {'H':>4} {'W':>5} " \
             f"{'passes':>7} {'median_ms':>10} {'iqr_ms':>8} {'gflops':>8}"
    lines = [header, "-" * len(header)]
    for r in results:
        lines.append(
            f"{r.method:<10} {r.width:>3} {r.C:>4} {r.H:>4} {r.W:>5} "
            f"{r.passes:>7} {r.median_ms:>10.3f} {r.iqr_ms:>8.3f} "
            f"{r.flops / 1e9:>8.3f}"
        )
    return "\n".join(lines) + "\n"
