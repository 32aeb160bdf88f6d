"""Dense tensor kernels with analytic backward passes."""

from .basic import (
    fc_backward,
    fc_forward,
    relu_backward,
    relu_forward,
    softmax,
    softmax_backward,
    softmax_rows,
)
from .conv import (
    conv2d_backward,
    conv2d_forward,
    transpose_conv2x_backward,
    transpose_conv2x_forward,
)
from .norm import batch_norm_backward, batch_norm_forward
from .resize import bilinear_upsample2x_backward, bilinear_upsample2x_forward
from .sliceconv import slice_conv1d_backward, slice_conv1d_forward

__all__ = [
    "relu_forward", "relu_backward",
    "fc_forward", "fc_backward",
    "softmax", "softmax_backward", "softmax_rows",
    "conv2d_forward", "conv2d_backward",
    "transpose_conv2x_forward", "transpose_conv2x_backward",
    "batch_norm_forward", "batch_norm_backward",
    "bilinear_upsample2x_forward", "bilinear_upsample2x_backward",
    "slice_conv1d_forward", "slice_conv1d_backward",
]
