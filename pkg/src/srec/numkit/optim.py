"""Adam optimizer and training hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .tensor import Parameter


@dataclass
class TrainConfig:
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 8
    epochs: int = 50
    weight_decay: float = 0.0
    grad_clip: float = 0.0
    loss_kind: str = "mse"
    max_steps: int | None = None  # overrides epochs when set
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss_kind != "mse":
            raise ValueError(f"unsupported loss {self.loss_kind!r}")


class MissingGradientError(RuntimeError):
    pass


def adam_step(params: Iterable[Parameter], config: TrainConfig) -> None:
    """One bias-corrected Adam update; clears gradients afterwards."""
    params = list(params)
    for p in params:
        if p.grad is None:
            raise MissingGradientError(f"parameter {p!r} has no gradient")
    if config.grad_clip > 0:
        total = np.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2)) for p in params))
        if total > config.grad_clip:
            scale = config.grad_clip / total
            for p in params:
                p.grad = p.grad * scale
    b1, b2 = config.beta1, config.beta2
    for p in params:
        g = p.grad
        if config.weight_decay:
            g = g + config.weight_decay * p.data
        p.t += 1
        p.m *= b1
        p.m += (1 - b1) * g
        p.v *= b2
        p.v += (1 - b2) * g * g
        m_hat = p.m / (1 - b1 ** p.t)
        v_hat = p.v / (1 - b2 ** p.t)
        p.data -= (config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)).astype(p.dtype)
        p.grad = None
