"""sklearn-style estimator facade over the lane detection pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import existence_vector, rasterize_targets
from .network import ModelConfig
from .train import predict_lanes, train_model
from .validation import ensure_nchw


class LaneDetector(BaseEstimator):
    """fit on images plus lane labels, predict lane polylines.

    Hyperparameters mirror the model config one to one, so get_params /
    set_params and clone() behave as sklearn expects.
    """

    def __init__(self, image_height: int = 96, image_width: int = 160,
                 channels=(32, 64, 128), use_resa: bool = True,
                 resa_iterations: int = 4, resa_kernel_width: int = 9,
                 resa_directions: str = "dulr", resa_fusion: str = "add",
                 decoder: str = "busd", num_lanes: int = 4,
                 existence_tap: str = "resa", precision: str = "f32",
                 bg_weight: float = 0.4, exist_loss_weight: float = 1.0,
                 base_lr: float = 0.025, momentum: float = 0.9,
                 weight_decay: float = 1e-4, warmup_iters: int = 500,
                 total_iters: int = 1500, poly_power: float = 0.9,
                 batch_size: int = 1, random_state: int = 0):
        self.image_height = image_height
        self.image_width = image_width
        self.channels = channels
        self.use_resa = use_resa
        self.resa_iterations = resa_iterations
        self.resa_kernel_width = resa_kernel_width
        self.resa_directions = resa_directions
        self.resa_fusion = resa_fusion
        self.decoder = decoder
        self.num_lanes = num_lanes
        self.existence_tap = existence_tap
        self.precision = precision
        self.bg_weight = bg_weight
        self.exist_loss_weight = exist_loss_weight
        self.base_lr = base_lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.warmup_iters = warmup_iters
        self.total_iters = total_iters
        self.poly_power = poly_power
        self.batch_size = batch_size
        self.random_state = random_state

    def _config(self) -> ModelConfig:
        return ModelConfig(
            image_height=self.image_height, image_width=self.image_width,
            channels=tuple(self.channels), use_resa=self.use_resa,
            resa_iterations=self.resa_iterations,
            resa_kernel_width=self.resa_kernel_width,
            resa_directions=self.resa_directions, resa_fusion=self.resa_fusion,
            decoder=self.decoder, num_lanes=self.num_lanes,
            existence_tap=self.existence_tap, precision=self.precision,
            bg_weight=self.bg_weight, exist_loss_weight=self.exist_loss_weight,
            base_lr=self.base_lr, momentum=self.momentum,
            weight_decay=self.weight_decay, warmup_iters=self.warmup_iters,
            total_iters=self.total_iters, poly_power=self.poly_power,
            batch_size=self.batch_size, seed=self.random_state,
        )

    def _check_images(self, X, config) -> np.ndarray:
        X = ensure_nchw(np.asarray(X), "X", channels=3)
        if X.shape[2:] != (config.image_height, config.image_width):
            raise ValueError(
                f"images are {X.shape[2]}x{X.shape[3]}, expected "
                f"{config.image_height}x{config.image_width}"
            )
        return X.astype(config.dtype, copy=False)

    def fit(self, X, y):
        """X: (N, 3, H, W) images.  y: list of per-image lane label lists."""
        config = self._config()
        X = self._check_images(X, config)
        if len(y) != X.shape[0]:
            raise ValueError(f"{len(y)} label lists for {X.shape[0]} images")
        seg = np.stack([
            rasterize_targets(lanes, config.image_height, config.image_width,
                              config.num_lanes)
            for lanes in y
        ])
        exist = np.stack([
            existence_vector(lanes, config.num_lanes) for lanes in y
        ]).astype(config.dtype)
        self.network_, self.loss_log_ = train_model(config, X, seg, exist)
        return self

    def predict(self, X):
        """Returns one list of LaneLabel per image."""
        if not hasattr(self, "network_"):
            raise NotFittedError("LaneDetector must be fitted before predict")
        config = self.network_.config
        X = self._check_images(X, config)
        return predict_lanes(self.network_, X)

    def score(self, X, y) -> float:
        """Mask-IoU F1 of predict(X) against the given lane labels."""
        from .metrics import culane_f1
        config = self._config()
        preds = self.predict(X)
        report = culane_f1(preds, list(y), config.image_height, config.image_width)
        return float(report.values["f1"])
