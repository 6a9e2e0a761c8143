"""Minimal tensor/autodiff kernel: conv layers, pixel shuffle, Adam, checkpoints."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .kernels import BACKEND
from .layers import Conv2d
from .ops import (activation, add, avg_pool2d, channel_shift, concat, conv2d, mse_loss, mul,
                  pad_last, pixel_shuffle, pixel_unshuffle, relu, resample, reshape, sigmoid,
                  straight_through, sub, tanh, truncate_last, upsample_nearest)
from .optim import MissingGradientError, TrainConfig, adam_step
from .tensor import (Module, NonFiniteError, Parameter, Tensor, default_dtype, no_grad, precision,
                     set_default_dtype)

__all__ = [
    "BACKEND", "CheckpointError", "Conv2d", "GradCheckReport", "MissingGradientError", "Module",
    "NonFiniteError", "Parameter", "Tensor", "TrainConfig", "activation", "adam_step", "add",
    "avg_pool2d", "channel_shift", "concat", "conv2d", "default_dtype", "grad_check",
    "load_checkpoint", "mse_loss", "mul", "no_grad", "pad_last", "pixel_shuffle", "pixel_unshuffle",
    "precision", "relu", "resample", "reshape", "save_checkpoint", "set_default_dtype",
    "sigmoid", "straight_through", "sub", "tanh", "truncate_last", "upsample_nearest",
]
