"""Central finite-difference check of analytic gradients."""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import ops
from .tensor import NonFiniteError, Tensor, make_result


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    checked: int
    per_tensor: list[float] = field(default_factory=list)
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_rel_error < self.tolerance


@contextlib.contextmanager
def _record_masks():
    log: list = []
    prev, ops._mask_log = ops._mask_log, log
    try:
        yield log
    finally:
        ops._mask_log = prev


def grad_check(fn: Callable[[], Tensor], tensors: Sequence[Tensor], tolerance: float = 1e-4,
               h: float = 1e-5, max_elements: int | None = None, seed: int = 0,
               floor: float = 1e-6) -> GradCheckReport:
    """Compare backprop gradients of ``fn`` w.r.t. ``tensors`` against central differences.

    Non-scalar outputs are reduced with a fixed random projection of their
    change from the unperturbed output. Relative error
    per element is ``|a - n| / max(|a|, |n|, floor)``. ``max_elements`` samples
    that many entries per tensor instead of checking all of them.

    A central difference whose +-h evaluations flip any ReLU mask relative to the
    unperturbed pass straddles a kink, where the function is not differentiable
    on the stencil; such elements are not compared and are counted in ``skipped``.
    """
    for t in tensors:
        if t.dtype != np.float64:
            raise TypeError("gradient checks need float64 tensors")
    rng = np.random.default_rng(seed)
    probe = fn()
    weights = rng.standard_normal(probe.shape) if probe.size != 1 else None
    # Projecting the deviation from the unperturbed output (same gradient) keeps
    # the scalar small, so its rounding does not swamp tiny difference quotients.
    baseline = probe.data.copy()

    def scalar() -> Tensor:
        out = fn()
        if weights is None:
            return ops.sub(out, float(baseline))
        prod = ops.mul(ops.sub(out, Tensor(baseline)), Tensor(weights, dtype=np.float64))
        return make_result(np.asarray(prod.data.sum()), [prod],
                           lambda g: [np.full(prod.shape, g, dtype=prod.dtype)], "sum")

    for t in tensors:
        t.grad = None
        t.requires_grad = True
    with _record_masks() as base_masks:
        scalar().backward()
    analytic = []
    for t in tensors:
        if t.grad is None:
            analytic.append(np.zeros_like(t.data))
        else:
            if not np.isfinite(t.grad).all():
                raise NonFiniteError("non-finite analytic gradient")
            analytic.append(t.grad.copy())
        t.grad = None

    def evaluate():
        with _record_masks() as masks:
            value = float(scalar().data)
        return value, masks == base_masks

    per_tensor = []
    checked = 0
    skipped = 0
    for t, a in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            idx = rng.choice(flat.size, size=max_elements, replace=False)
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp, same_p = evaluate()
            flat[i] = orig - h
            fm, same_m = evaluate()
            flat[i] = orig
            num = (fp - fm) / (2 * h)
            if not np.isfinite(num):
                raise NonFiniteError("non-finite numerical gradient")
            if not (same_p and same_m):
                skipped += 1
                continue
            ai = float(a.reshape(-1)[i])
            worst = max(worst, abs(ai - num) / max(abs(ai), abs(num), floor))
            checked += 1
        per_tensor.append(worst)
    return GradCheckReport(max(per_tensor, default=0.0), tolerance, checked, per_tensor, skipped)
