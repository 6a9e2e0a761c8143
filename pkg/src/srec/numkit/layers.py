"""Parameterised layers built on :mod:`numkit.ops`."""

from __future__ import annotations

import numpy as np

from . import ops
from .tensor import Module, Parameter, Tensor, default_dtype


class Conv2d(Module):
    """Square-kernel convolution. Weights ~ U(+-sqrt(1/(C_in k^2))), biases zero."""

    def __init__(self, c_in: int, c_out: int, k: int = 3, stride: int = 1,
                 padding: str = "same", rng: np.random.Generator | None = None,
                 bias: bool = True):
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = np.sqrt(1.0 / (c_in * k * k))
        dtype = default_dtype()
        self.weight = Parameter(rng.uniform(-bound, bound, size=(c_out, c_in, k, k)), dtype=dtype)
        self.bias = Parameter(np.zeros(c_out), dtype=dtype) if bias else None
        self.stride = stride
        self.padding = padding

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, padding=self.padding, stride=self.stride)
