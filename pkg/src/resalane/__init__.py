"""Lane detection with recurrent feature-shift aggregation.

Dense NCHW tensors throughout, NumPy as the only numeric substrate.
Every operator has an analytic backward pass validated by finite
differences (see gradcheck).  The two estimator entry points follow
sklearn conventions:

- ResaAggregator: shape-preserving feature transform (fit/transform)
- LaneDetector: end-to-end trainable detector (fit/predict/score)
"""

from .detector import LaneDetector
from .network import LaneNetwork, ModelConfig, load_config, save_config
from .resa import ResaAggregator, ResaConfig, compute_stride_schedule

__version__ = "0.1.0"

__all__ = [
    "LaneDetector",
    "LaneNetwork",
    "ModelConfig",
    "ResaAggregator",
    "ResaConfig",
    "load_config",
    "save_config",
    "compute_stride_schedule",
    "__version__",
]
