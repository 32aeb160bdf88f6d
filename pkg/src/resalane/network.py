"""End-to-end lane detection network.

Encoder stub (three stride-2 conv+BN+relu stages, 8x reduction) ->
feature aggregation -> decoder -> heads.  The segmentation head predicts
num_lanes + 1 classes per pixel at full resolution; the existence head
predicts one logit per lane from a pooled feature tap.  The decoder is
either the bilateral up-sampling stack or a plain bilinear 8x up-sampling
of the segmentation logits.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .data import LaneLabel
from .decoder import BilateralDecoder
from .layers import BatchNorm2d, Bilinear2x, Composite, Conv2d, Linear, Relu, Sequential
from .ops import softmax
from .resa import ResaConfig, init_resa_params, resa_backward, resa_forward
from .validation import ensure_nchw

DECODERS = ("busd", "bilinear8x")
EXISTENCE_TAPS = ("resa", "decoder")
PRECISIONS = ("f32", "f64")


@dataclass
class ModelConfig:
    image_height: int = 96
    image_width: int = 160
    channels: tuple = (32, 64, 128)
    use_resa: bool = True
    resa_iterations: int = 4
    resa_kernel_width: int = 9
    resa_directions: str = "dulr"
    resa_fusion: str = "add"
    decoder: str = "busd"
    num_lanes: int = 4
    existence_tap: str = "resa"
    precision: str = "f32"
    bg_weight: float = 0.4
    exist_loss_weight: float = 1.0
    base_lr: float = 0.025
    momentum: float = 0.9
    weight_decay: float = 1e-4
    warmup_iters: int = 500
    total_iters: int = 1500
    poly_power: float = 0.9
    batch_size: int = 1
    seed: int = 0
    prob_threshold: float = 0.3
    exist_threshold: float = 0.5
    decode_row_step: int = 4
    train_dir: str = ""
    val_dir: str = ""
    log_every: int = 10

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if len(self.channels) != 3:
            raise ValueError(f"encoder plan must have 3 stages, got {self.channels}")
        if self.image_height % 8 or self.image_width % 8:
            raise ValueError(
                f"image size must be divisible by 8, got "
                f"{self.image_height}x{self.image_width}"
            )
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}, got {self.decoder!r}")
        if self.decoder == "busd" and self.channels[-1] % 8:
            raise ValueError(
                f"busd decoder needs encoder output divisible by 8, got {self.channels[-1]}"
            )
        if self.existence_tap not in EXISTENCE_TAPS:
            raise ValueError(
                f"existence_tap must be one of {EXISTENCE_TAPS}, got {self.existence_tap!r}"
            )
        if self.existence_tap == "decoder" and self.decoder != "busd":
            raise ValueError("existence_tap='decoder' requires the busd decoder")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}, got {self.precision!r}")
        if self.num_lanes < 1:
            raise ValueError(f"num_lanes must be >= 1, got {self.num_lanes}")
        if self.decode_row_step < 1:
            raise ValueError(f"decode_row_step must be >= 1, got {self.decode_row_step}")
        # constructing the value validates iteration/width/direction/fusion choices
        self.resa_config()

    def resa_config(self) -> ResaConfig:
        return ResaConfig(iterations=self.resa_iterations,
                          kernel_width=self.resa_kernel_width,
                          directions=self.resa_directions,
                          fusion=self.resa_fusion)

    @property
    def dtype(self):
        return np.float64 if self.precision == "f64" else np.float32

    @property
    def num_classes(self) -> int:
        return self.num_lanes + 1


_TUPLE_FIELDS = {"channels"}
_BOOL_FIELDS = {"use_resa"}


def _parse_config_value(name: str, kind: str, raw: str):
    raw = raw.strip()
    if name in _TUPLE_FIELDS:
        return tuple(int(p) for p in raw.split(",") if p.strip())
    if name in _BOOL_FIELDS or kind == "bool":
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {name} expects a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def config_from_lines(lines, base: ModelConfig | None = None) -> ModelConfig:
    """Parse key=value lines (blank lines and # comments allowed)."""
    kinds = {f.name: f.type for f in dataclasses.fields(ModelConfig)}
    values = dataclasses.asdict(base) if base is not None else {}
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in kinds:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _parse_config_value(key, kinds[key], raw)
    return ModelConfig(**values)


def load_config(path) -> ModelConfig:
    with open(path, "r", encoding="utf-8") as f:
        return config_from_lines(f.readlines())


def save_config(config: ModelConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for field in dataclasses.fields(ModelConfig):
            value = getattr(config, field.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            f.write(f"{field.name}={value}\n")


class _ResaStage(Composite):
    """Layer wrapper around the functional aggregation operator."""

    def __init__(self, channels: int, cfg: ResaConfig, seed: int, dtype):
        super().__init__("resa", dtype)
        self.cfg = cfg
        params = init_resa_params(channels, cfg, seed=seed, dtype=dtype)
        self._params = dict(params)
        self._grads = {k: np.zeros_like(v) for k, v in params.items()}
        self._caches = None

    def forward(self, x, train):
        y, self._caches = resa_forward(x, self._params, self.cfg)
        return y

    def backward(self, grad):
        gx, gparams = resa_backward(grad, self._caches, self._params, self.cfg)
        for name, g in gparams.items():
            self._grads[name] += g
        return gx


def _encoder(channels, seed, dtype) -> Sequential:
    stages = []
    c_prev = 3
    for i, c in enumerate(channels):
        stages += [
            Conv2d(f"encoder.{i}.conv", c_prev, c, 3, 3, stride=2, pad=1,
                   bias=False, seed=seed, dtype=dtype),
            BatchNorm2d(f"encoder.{i}.bn", c, dtype),
            Relu(f"encoder.{i}.relu", dtype),
        ]
        c_prev = c
    return Sequential("encoder", stages, dtype)


def weighted_seg_loss(logits: np.ndarray, target: np.ndarray, bg_weight: float):
    """Per-pixel multiclass cross entropy, background class down-weighted.

    Returns (loss, dlogits).  The loss is the mean over all pixels of
    weight * nll, so with uniform logits and an all-background target the
    value is bg_weight * log(num_classes).
    """
    n, k, h, w = logits.shape
    if target.shape != (n, h, w):
        raise ValueError(f"target shape {target.shape} does not match {(n, h, w)}")
    if target.min() < 0 or target.max() >= k:
        raise ValueError(f"target classes out of range [0, {k})")
    m = logits.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
    logp = logits - lse
    t = target[:, None, :, :]
    nll = -np.take_along_axis(logp, t, axis=1)[:, 0]
    weights = np.where(target == 0, bg_weight, 1.0).astype(logits.dtype)
    count = n * h * w
    loss = float((weights * nll).sum() / count)
    probs = np.exp(logp)
    onehot = np.zeros_like(logits)
    np.put_along_axis(onehot, t, 1.0, axis=1)
    dlogits = (probs - onehot) * weights[:, None, :, :] / count
    return loss, dlogits


def existence_loss(logits: np.ndarray, target: np.ndarray):
    """Mean binary cross entropy on lane-existence logits.  Returns (loss, dlogits)."""
    if logits.shape != target.shape:
        raise ValueError(f"logits {logits.shape} and target {target.shape} differ")
    z = logits
    t = target.astype(logits.dtype)
    per = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    count = z.size
    loss = float(per.sum() / count)
    sig = 0.5 * (1.0 + np.tanh(0.5 * z))
    dlogits = (sig - t) / count
    return loss, dlogits


class LaneNetwork:
    """Full model with manual forward/backward and named parameters."""

    def __init__(self, config: ModelConfig, seed: int | None = None):
        self.config = config
        self.seed = config.seed if seed is None else seed
        dtype = config.dtype
        c_feat = config.channels[-1]
        self.encoder = _encoder(config.channels, self.seed, dtype)
        self.resa = (_ResaStage(c_feat, config.resa_config(), self.seed, dtype)
                     if config.use_resa else None)
        if config.decoder == "busd":
            self.busd = BilateralDecoder(c_feat, 3, "busd", seed=self.seed, dtype=dtype)
            head_in = self.busd.c_out
            self.up_stack = None
        else:
            self.busd = None
            head_in = c_feat
            self.up_stack = [Bilinear2x(f"up.{i}", dtype) for i in range(3)]
        self.seg_head = Conv2d("head.seg", head_in, config.num_classes, 1, 1,
                               bias=True, seed=self.seed, dtype=dtype)
        tap_channels = (self.busd.c_out
                        if (config.existence_tap == "decoder" and self.busd is not None)
                        else c_feat)
        self.exist_head = Linear("head.exist", tap_channels, config.num_lanes,
                                 seed=self.seed, dtype=dtype)
        self._stash = {}

    # ---- parameter plumbing

    def _components(self):
        comps = [self.encoder]
        if self.resa is not None:
            comps.append(self.resa)
        if self.busd is not None:
            comps.append(self.busd)
        comps += [self.seg_head, self.exist_head]
        return comps

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for c in self._components():
            out.update(c.params())
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for c in self._components():
            out.update(c.grads())
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for c in self._components():
            out.update(c.buffers())
        return out

    def zero_grads(self) -> None:
        for c in self._components():
            c.zero_grads()

    def state_dict(self) -> dict[str, np.ndarray]:
        out = dict(self.params())
        out.update(self.buffers())
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        own = self.state_dict()
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise ValueError(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, arr in own.items():
            src = state[name]
            if src.shape != arr.shape:
                raise ValueError(f"{name}: shape {src.shape} does not match {arr.shape}")
            arr[...] = src.astype(arr.dtype)

    # ---- forward / backward

    def forward(self, x: np.ndarray, train: bool) -> dict[str, np.ndarray]:
        ensure_nchw(x, "x", channels=3)
        if x.dtype != self.config.dtype:
            raise ValueError(f"input dtype {x.dtype} does not match model precision "
                             f"{self.config.precision}")
        feat = self.encoder.forward(x, train)
        agg = self.resa.forward(feat, train) if self.resa is not None else feat
        if self.busd is not None:
            dec = self.busd.forward(agg, train)
            seg_logits = self.seg_head.forward(dec, train)
        else:
            dec = agg
            seg_small = self.seg_head.forward(agg, train)
            seg_logits = seg_small
            for up in self.up_stack:
                seg_logits = up.forward(seg_logits, train)
        tap = dec if (self.config.existence_tap == "decoder" and self.busd is not None) else agg
        pooled = tap.mean(axis=(2, 3))
        exist_logits = self.exist_head.forward(pooled, train)
        self._stash = {"tap_shape": tap.shape}
        return {"seg_logits": seg_logits, "exist_logits": exist_logits}

    def backward(self, dseg: np.ndarray, dexist: np.ndarray) -> np.ndarray:
        """Backward from loss gradients on both heads; returns grad wrt input."""
        cfg = self.config
        dpooled = self.exist_head.backward(dexist.astype(cfg.dtype, copy=False))
        n, c = dpooled.shape
        _, _, th, tw = self._stash["tap_shape"]
        dtap = np.broadcast_to(
            dpooled[:, :, None, None] / (th * tw), (n, c, th, tw)
        ).astype(cfg.dtype)

        if self.busd is not None:
            gdec = self.seg_head.backward(dseg.astype(cfg.dtype, copy=False))
            if cfg.existence_tap == "decoder":
                gdec = gdec + dtap
                gagg = self.busd.backward(gdec)
            else:
                gagg = self.busd.backward(gdec) + dtap
        else:
            g = dseg.astype(cfg.dtype, copy=False)
            for up in reversed(self.up_stack):
                g = up.backward(g)
            gagg = self.seg_head.backward(g) + dtap

        if self.resa is not None:
            gagg = self.resa.backward(gagg)
        return self.encoder.backward(gagg)

    # ---- loss

    def loss(self, out: dict[str, np.ndarray], seg_target: np.ndarray,
             exist_target: np.ndarray):
        """Returns (total_loss, dseg_logits, dexist_logits)."""
        cfg = self.config
        seg_loss, dseg = weighted_seg_loss(out["seg_logits"], seg_target, cfg.bg_weight)
        ex_loss, dexist = existence_loss(
            out["exist_logits"], exist_target.astype(cfg.dtype, copy=False))
        total = seg_loss + cfg.exist_loss_weight * ex_loss
        return total, dseg, cfg.exist_loss_weight * dexist


def decode_lanes(seg_logits: np.ndarray, exist_logits: np.ndarray,
                 config: ModelConfig) -> list[LaneLabel]:
    """Decode one sample's head outputs into lane polylines.

    A lane is emitted when its existence probability clears the threshold;
    its points are the per-row argmax of the lane's class probability map,
    taken every decode_row_step rows where the probability clears
    prob_threshold.  Lanes with fewer than two points are dropped.
    """
    k, h, w = seg_logits.shape
    if k != config.num_classes:
        raise ValueError(f"expected {config.num_classes} classes, got {k}")
    probs = softmax(seg_logits.astype(np.float64), axis=0)
    exist = 1.0 / (1.0 + np.exp(-exist_logits.astype(np.float64)))
    lanes = []
    for i in range(config.num_lanes):
        if exist[i] <= config.exist_threshold:
            continue
        lane_prob = probs[i + 1]
        points = []
        for row in range(0, h, config.decode_row_step):
            col = int(np.argmax(lane_prob[row]))
            if lane_prob[row, col] > config.prob_threshold:
                points.append((float(col), float(row)))
        if len(points) >= 2:
            lanes.append(LaneLabel(lane_index=i, points=points))
    return lanes
