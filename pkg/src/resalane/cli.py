"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data or file error, 3 check
failure (failed gradient check).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

LANE_COLORS = ((0.9, 0.2, 0.2), (0.2, 0.8, 0.3), (0.25, 0.45, 0.95), (0.95, 0.8, 0.2),
               (0.8, 0.3, 0.8), (0.3, 0.8, 0.8))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="resalane", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--difficulty", choices=("normal", "crowded", "noline"),
                   default="normal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--max-lanes", type=int, default=4)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--metric", choices=("culane", "tusimple"), default="culane")
    p.add_argument("--config", default=None,
                   help="model config (default: config.resolved next to the checkpoint)")
    p.add_argument("--out", default=None, help="directory for report files")

    p = sub.add_parser("infer", help="run one image and write a lane overlay")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None,
                   help="model config (default: config.resolved next to the checkpoint)")

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--scope", choices=("tensor", "resa", "busd", "model", "all"),
                   default="all")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("inspect", help="visualize aggregation reach per iteration")
    p.add_argument("--axis", choices=("h", "v"), default="h")
    p.add_argument("--L", type=int, required=True, dest="length",
                   help="axis length (number of slice positions)")
    p.add_argument("--K", type=int, required=True, dest="iterations",
                   help="number of aggregation iterations")
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="aggregation vs sequential propagation timing")
    p.add_argument("--widths", default="9",
                   help="comma-separated slice kernel widths, e.g. 7,9,11")
    p.add_argument("--sizes", default="100",
                   help="comma-separated feature map sizes: W or HxW, e.g. 50,36x100")
    p.add_argument("--channels", type=int, default=128)
    p.add_argument("--height", type=int, default=36,
                   help="feature map height for plain-W sizes")
    p.add_argument("--iterations", type=int, default=4)
    p.add_argument("--directions", default="dulr")
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV output path")
    return parser


def cmd_gen(args) -> int:
    from .data import generate_dataset
    names = generate_dataset(args.out, args.count, args.difficulty, args.seed,
                             args.height, args.width, args.max_lanes)
    print(f"wrote {len(names)} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    from threadpoolctl import threadpool_limits

    from .data import load_dataset_arrays
    from .network import load_config, save_config
    from .train import build_targets, save_checkpoint, train_model, write_loss_log

    config = load_config(args.config)
    if not config.train_dir:
        raise ValueError("config must set train_dir")
    images, lanes_lists = load_dataset_arrays(config.train_dir)
    if images.shape[2:] != (config.image_height, config.image_width):
        raise ValueError(
            f"dataset images are {images.shape[2]}x{images.shape[3]}, config says "
            f"{config.image_height}x{config.image_width}"
        )
    images = images.astype(config.dtype)
    seg, exist = build_targets(lanes_lists, config)

    os.makedirs(args.out, exist_ok=True)
    os.makedirs(os.path.join(args.out, "checkpoints"), exist_ok=True)
    os.makedirs(os.path.join(args.out, "logs"), exist_ok=True)
    save_config(config, os.path.join(args.out, "config.resolved"))

    def log_cb(it, lr, loss):
        print(f"iter {it:6d}  lr {lr:.6f}  loss {loss:.6f}")

    # single BLAS thread keeps runs bit-reproducible
    with threadpool_limits(limits=1):
        net, log = train_model(config, images, seg, exist, log_cb=log_cb)

    write_loss_log(log, os.path.join(args.out, "logs", "loss.csv"))
    save_checkpoint(net, os.path.join(args.out, "checkpoints", "final.rten"))
    print(f"finished {config.total_iters} iterations; "
          f"checkpoint at {os.path.join(args.out, 'checkpoints', 'final.rten')}")
    return 0


def _find_config(config_path, checkpoint_path):
    if config_path is not None:
        return config_path
    ckpt_dir = os.path.dirname(os.path.abspath(checkpoint_path))
    for base in (ckpt_dir, os.path.dirname(ckpt_dir)):
        candidate = os.path.join(base, "config.resolved")
        if os.path.isfile(candidate):
            return candidate
    raise ValueError(
        "no --config given and no config.resolved found next to the checkpoint"
    )


def _load_net(config_path, checkpoint_path):
    from .network import LaneNetwork, load_config
    from .train import load_checkpoint
    config = load_config(_find_config(config_path, checkpoint_path))
    net = LaneNetwork(config)
    load_checkpoint(net, checkpoint_path)
    return net


def cmd_eval(args) -> int:
    from .data import load_dataset_arrays
    from .metrics import culane_f1, tusimple_accuracy, write_report
    from .train import predict_lanes

    net = _load_net(args.config, args.checkpoint)
    config = net.config
    images, gt_lanes = load_dataset_arrays(args.data)
    images = images.astype(config.dtype)
    preds = predict_lanes(net, images)
    if args.metric == "culane":
        report = culane_f1(preds, gt_lanes, config.image_height, config.image_width)
    else:
        h_samples = list(range(0, config.image_height, config.decode_row_step))
        report = tusimple_accuracy(preds, gt_lanes, h_samples)
    print(report.as_text(), end="")
    if args.out:
        write_report(report, args.out)
    return 0


def cmd_infer(args) -> int:
    from .data import load_image_png, rasterize_lane_mask, save_image_png, default_line_width
    from .train import predict_lanes

    net = _load_net(args.config, args.checkpoint)
    config = net.config
    image = load_image_png(args.image)
    if image.shape[1:] != (config.image_height, config.image_width):
        raise ValueError(
            f"image is {image.shape[1]}x{image.shape[2]}, model expects "
            f"{config.image_height}x{config.image_width}"
        )
    lanes = predict_lanes(net, image[None].astype(config.dtype))[0]
    overlay = image.copy()
    width_px = default_line_width(config.image_width)
    for lane in lanes:
        color = LANE_COLORS[lane.lane_index % len(LANE_COLORS)]
        mask = rasterize_lane_mask(lane, config.image_height, config.image_width,
                                   width_px)
        for c in range(3):
            overlay[c][mask] = color[c]
    save_image_png(args.out, overlay)
    print(f"{len(lanes)} lanes -> {args.out}")
    for lane in lanes:
        print(f"  lane {lane.lane_index}: {len(lane.points)} points")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_checks
    results = run_checks(args.scope, args.seed)
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  max_rel_err {r.max_err:.3e}  tol {r.tol:.0e}  {status}")
        failed += 0 if r.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 3


def cmd_inspect(args) -> int:
    from PIL import Image

    from .resa import coverage_grid

    grid, strides = coverage_grid(args.length, args.iterations, args.axis)
    print("strides:", " ".join(str(s) for s in strides))
    cell, border = 16, 2
    k, length = grid.shape
    canvas = np.full((k * (cell + border) + border,
                      length * (cell + border) + border), 24, dtype=np.uint8)
    for i in range(k):
        for j in range(length):
            y0 = border + i * (cell + border)
            x0 = border + j * (cell + border)
            canvas[y0:y0 + cell, x0:x0 + cell] = 230 if grid[i, j] else 70
    Image.fromarray(canvas, mode="L").save(args.out, format="PNG")
    print(f"reach grid ({k} iterations x {length} positions) -> {args.out}")
    return 0


def _parse_size(token: str, default_height: int) -> tuple[int, int]:
    if "x" in token:
        h, _, w = token.partition("x")
        return int(h), int(w)
    return default_height, int(token)


def cmd_bench(args) -> int:
    from .benchmark import format_bench_table, run_bench, write_bench_csv

    try:
        kernel_widths = [int(w) for w in args.widths.split(",") if w.strip()]
        sizes = [_parse_size(t.strip(), args.height)
                 for t in args.sizes.split(",") if t.strip()]
    except ValueError as e:
        raise ValueError(f"bad size list: {e}") from e
    results = []
    for kw in kernel_widths:
        for h, w in sizes:
            results.extend(run_bench(
                args.channels, h, w, kernel_width=kw,
                iterations=args.iterations, directions=args.directions,
                warmup=args.warmup, repeats=args.repeats, threads=args.threads,
                seed=args.seed,
            ))
    print(format_bench_table(results), end="")
    if args.out:
        write_bench_csv(results, args.out)
        print(f"csv -> {args.out}")
    return 0


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
    "gradcheck": cmd_gradcheck,
    "inspect": cmd_inspect,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
