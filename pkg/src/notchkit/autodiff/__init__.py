"""Minimal reverse-mode autodiff over float32 numpy arrays."""

from .gradcheck import gradient_check
from .optim import OptimizerState, adam_step
from .ops import (apply_kernel_field, avg_pool2d, concat_channels, conv2d,
                  conv2d_transpose, cross_entropy, filter_with_kernels,
                  global_avg_pool, l1_loss, linear, relu, sigmoid,
                  softmax_channels, upsample_bilinear, upsample_nearest)
from .tensor import Tensor, debug_checks_enabled, set_debug_checks

__all__ = [
    "Tensor", "OptimizerState", "adam_step", "gradient_check",
    "set_debug_checks", "debug_checks_enabled",
    "conv2d", "conv2d_transpose", "avg_pool2d", "global_avg_pool",
    "upsample_nearest", "upsample_bilinear", "concat_channels", "linear",
    "relu", "sigmoid", "softmax_channels", "l1_loss", "cross_entropy",
    "filter_with_kernels", "apply_kernel_field",
]
