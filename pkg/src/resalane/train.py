"""Training loop: SGD with momentum, linear warmup + polynomial decay."""

from __future__ import annotations

import numpy as np

from .data import existence_vector, rasterize_targets
from .network import LaneNetwork, ModelConfig, decode_lanes
from .rten import load_archive, save_archive
from .seeding import named_rng


def lr_at(iteration: int, base_lr: float, warmup_iters: int, total_iters: int,
          power: float = 0.9) -> float:
    """Linear 0 -> base over the warmup, then base * (1 - t/T)^power."""
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration}")
    if warmup_iters > 0 and iteration < warmup_iters:
        return base_lr * iteration / warmup_iters
    t = min(iteration / total_iters, 1.0)
    return base_lr * (1.0 - t) ** power


class SgdMomentum:
    """v <- m*v + g + wd*w ; w <- w - lr*v, applied to every parameter."""

    def __init__(self, params: dict[str, np.ndarray], momentum: float = 0.9,
                 weight_decay: float = 0.0):
        self.params = params
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        for name, w in self.params.items():
            v = self.velocity[name]
            v *= self.momentum
            v += grads[name]
            if self.weight_decay:
                v += self.weight_decay * w
            w -= lr * v


def build_targets(lanes_lists, config: ModelConfig):
    """Rasterize lane labels into (seg targets, existence targets)."""
    seg = np.stack([
        rasterize_targets(lanes, config.image_height, config.image_width,
                          config.num_lanes)
        for lanes in lanes_lists
    ])
    exist = np.stack([
        existence_vector(lanes, config.num_lanes) for lanes in lanes_lists
    ]).astype(config.dtype)
    return seg, exist


def build_training_arrays(samples, config: ModelConfig):
    """Stack Samples into (images, seg targets, existence targets)."""
    images = np.stack([s.image for s in samples]).astype(config.dtype)
    seg, exist = build_targets([s.lanes for s in samples], config)
    return images, seg, exist


def train_model(config: ModelConfig, images: np.ndarray, seg: np.ndarray,
                exist: np.ndarray, log_cb=None):
    """Train a fresh network for config.total_iters.  Returns (net, log)
    where log rows are (iteration, lr, loss)."""
    n = images.shape[0]
    if n < 1:
        raise ValueError("training needs at least one sample")
    net = LaneNetwork(config)
    opt = SgdMomentum(net.params(), config.momentum, config.weight_decay)
    batch_rng = named_rng(config.seed, "train.batches")
    log = []
    for it in range(config.total_iters):
        idx = batch_rng.integers(0, n, size=config.batch_size)
        xb = np.ascontiguousarray(images[idx])
        out = net.forward(xb, train=True)
        loss, dseg, dexist = net.loss(out, seg[idx], exist[idx])
        net.zero_grads()
        net.backward(dseg, dexist)
        lr = lr_at(it, config.base_lr, config.warmup_iters, config.total_iters,
                   config.poly_power)
        opt.step(net.grads(), lr)
        log.append((it, lr, float(loss)))
        if log_cb is not None and (it % config.log_every == 0 or it == config.total_iters - 1):
            log_cb(it, lr, float(loss))
    return net, log


def predict_lanes(net: LaneNetwork, images: np.ndarray, chunk: int = 8):
    """Inference in chunks; returns one lane list per image."""
    cfg = net.config
    results = []
    for start in range(0, images.shape[0], chunk):
        batch = np.ascontiguousarray(images[start : start + chunk]).astype(
            cfg.dtype, copy=False)
        out = net.forward(batch, train=False)
        for i in range(batch.shape[0]):
            results.append(decode_lanes(out["seg_logits"][i],
                                        out["exist_logits"][i], cfg))
    return results


def save_checkpoint(net: LaneNetwork, path) -> None:
    save_archive(path, net.state_dict())


def load_checkpoint(net: LaneNetwork, path) -> None:
    net.load_state(load_archive(path))


def write_loss_log(log, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("iter,lr,loss\n")
        for it, lr, loss in log:
            f.write(f"{it},{lr!r},{loss!r}\n")
