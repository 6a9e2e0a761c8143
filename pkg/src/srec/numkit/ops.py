"""Differentiable layer ops over :class:`Tensor`.

Spatial ops take ``C x H x W`` or batched ``N x C x H x W`` input. Elementwise
ops require identical shapes; a Python scalar is the only broadcast allowed.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import kernels
from .tensor import Tensor, make_result


def _data(x):
    return x.data if isinstance(x, Tensor) else x


def _batched(x: np.ndarray) -> tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ValueError(f"expected C x H x W or N x C x H x W, got shape {x.shape}")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           padding: str = "same", stride: int = 1) -> Tensor:
    """2-D cross-correlation with square ``C_out x C_in x k x k`` kernels."""
    xd, squeeze = _batched(x.data)
    w = weight.data
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ValueError(f"weight must be C_out x C_in x k x k, got {w.shape}")
    c_out, c_in, k, _ = w.shape
    n, c, h, wd = xd.shape
    if c != c_in:
        raise ValueError(f"input has {c} channels but weight expects {c_in}")
    if stride < 1:
        raise ValueError("stride must be positive")
    if padding == "same":
        if k % 2 == 0:
            raise ValueError("same padding needs an odd kernel size")
        pad = k // 2
    elif padding == "valid":
        if h < k or wd < k:
            raise ValueError(f"input {h}x{wd} smaller than kernel {k}")
        pad = 0
    else:
        raise ValueError(f"unknown padding {padding!r}")
    xd = xd.astype(w.dtype, copy=False)
    if pad:
        xp = np.pad(xd, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    else:
        xp = np.ascontiguousarray(xd)
    hp, wp = xp.shape[2], xp.shape[3]
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    cols = kernels.im2col(xp, k, stride)
    w2 = w.reshape(c_out, -1)
    out = np.matmul(w2, cols)
    if bias is not None:
        out += bias.data.reshape(1, c_out, 1)
    out = out.reshape(n, c_out, ho, wo)
    if squeeze:
        out = out[0]

    def backward(g):
        g2 = g.astype(w.dtype, copy=False).reshape(n, c_out, ho * wo)
        dw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
        dcols = np.matmul(w2.T, g2)
        dxp = kernels.col2im(np.ascontiguousarray(dcols), (n, c, hp, wp), k, stride)
        dx = dxp[:, :, pad:pad + h, pad:pad + wd] if pad else dxp
        if squeeze:
            dx = dx[0]
        grads = [np.ascontiguousarray(dx), dw]
        if bias is not None:
            grads.append(g2.sum(axis=(0, 2)))
        return grads

    parents = [x, weight] + ([bias] if bias is not None else [])
    return make_result(out, parents, backward, "conv2d")


def _shuffle(a: np.ndarray, r: int) -> np.ndarray:
    *lead, cr2, h, w = a.shape
    c = cr2 // (r * r)
    a = a.reshape(*lead, c, r, r, h, w)
    nl = len(lead)
    axes = list(range(nl)) + [nl, nl + 3, nl + 1, nl + 4, nl + 2]
    return a.transpose(axes).reshape(*lead, c, h * r, w * r)


def _unshuffle(a: np.ndarray, r: int) -> np.ndarray:
    *lead, c, hr, wr = a.shape
    h, w = hr // r, wr // r
    a = a.reshape(*lead, c, h, r, w, r)
    nl = len(lead)
    axes = list(range(nl)) + [nl, nl + 2, nl + 4, nl + 1, nl + 3]
    return a.transpose(axes).reshape(*lead, c * r * r, h, w)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange ``(C*r*r) x H x W`` into ``C x rH x rW``."""
    if r < 1:
        raise ValueError("scale factor must be positive")
    if x.ndim < 3 or x.shape[-3] % (r * r):
        raise ValueError(f"channel count of {x.shape} not divisible by r^2={r * r}")
    out = np.ascontiguousarray(_shuffle(x.data, r))
    return make_result(out, [x], lambda g: [_unshuffle(g, r)], "pixel_shuffle")


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    if r < 1:
        raise ValueError("scale factor must be positive")
    if x.ndim < 3 or x.shape[-1] % r or x.shape[-2] % r:
        raise ValueError(f"spatial extents of {x.shape} not divisible by {r}")
    out = np.ascontiguousarray(_unshuffle(x.data, r))
    return make_result(out, [x], lambda g: [_shuffle(g, r)], "pixel_unshuffle")


# When a list, every relu call appends its packed activation mask; the
# gradient checker uses this to spot finite-difference steps that cross a kink.
_mask_log: list | None = None


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    if _mask_log is not None:
        _mask_log.append(np.packbits(mask).tobytes())
    out = np.where(mask, x.data, 0).astype(x.dtype, copy=False)
    return make_result(out, [x], lambda g: [g * mask], "relu")


def _stable_sigmoid(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = _stable_sigmoid(x.data)
    return make_result(s, [x], lambda g: [g * s * (1 - s)], "sigmoid")


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return make_result(t, [x], lambda g: [g * (1 - t * t)], "tanh")


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    raise ValueError(f"unknown activation {kind!r}")


def avg_pool2d(x: Tensor, factor: int = 2) -> Tensor:
    *lead, h, w = x.shape
    if h % factor or w % factor:
        raise ValueError(f"extents {h}x{w} not divisible by {factor}")
    f = factor
    out = x.data.reshape(*lead, h // f, f, w // f, f).mean(axis=(-3, -1))

    def backward(g):
        g = np.repeat(np.repeat(g, f, axis=-2), f, axis=-1)
        return [g / (f * f)]

    return make_result(out, [x], backward, "avg_pool2d")


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    f = factor
    out = np.repeat(np.repeat(x.data, f, axis=-2), f, axis=-1)

    def backward(g):
        *lead, h, w = g.shape
        return [g.reshape(*lead, h // f, f, w // f, f).sum(axis=(-3, -1))]

    return make_result(out, [x], backward, "upsample_nearest")


def resample(x: Tensor, direction: str, factor: int = 2) -> Tensor:
    """``down``: average pooling; ``up``: nearest-neighbour repeat."""
    if direction == "down":
        return avg_pool2d(x, factor)
    if direction == "up":
        return upsample_nearest(x, factor)
    raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")


def concat(tensors: Sequence[Tensor], axis: int = -3) -> Tensor:
    """Concatenate along the channel axis (default)."""
    arrays = [t.data for t in tensors]
    out = np.concatenate(arrays, axis=axis)
    bounds = np.cumsum([a.shape[axis] for a in arrays])[:-1]

    def backward(g):
        return np.split(g, bounds, axis=axis)

    return make_result(out, list(tensors), backward, "concat")


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return make_result(a.data + b, [a], lambda g: [g], "add_scalar")
    _check_same(a, b, "add")
    return make_result(a.data + b.data, [a, b], lambda g: [g, g], "add")


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return make_result(a.data - b, [a], lambda g: [g], "sub_scalar")
    _check_same(a, b, "sub")
    return make_result(a.data - b.data, [a, b], lambda g: [g, -g], "sub")


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        scale = b
        return make_result(a.data * scale, [a], lambda g: [g * scale], "mul_scalar")
    _check_same(a, b, "mul")
    ad, bd = a.data, b.data
    return make_result(ad * bd, [a, b], lambda g: [g * bd, g * ad], "mul")


def channel_shift(x: Tensor, offsets: np.ndarray) -> Tensor:
    """Add a per-channel constant (used for mean shifting)."""
    offsets = np.asarray(offsets, dtype=x.dtype).reshape(-1, 1, 1)
    if offsets.shape[0] != x.shape[-3]:
        raise ValueError(f"{offsets.shape[0]} offsets for {x.shape[-3]} channels")
    return make_result(x.data + offsets, [x], lambda g: [g], "channel_shift")


def reshape(x: Tensor, shape) -> Tensor:
    src = x.shape
    return make_result(x.data.reshape(shape), [x], lambda g: [g.reshape(src)], "reshape")


def truncate_last(x: Tensor, n: int) -> Tensor:
    """Keep the first ``n`` entries along the last axis."""
    full = x.shape

    def backward(g):
        out = np.zeros(full, dtype=g.dtype)
        out[..., :n] = g
        return [out]

    return make_result(np.ascontiguousarray(x.data[..., :n]), [x], backward, "truncate")


def pad_last(x: Tensor, total: int) -> Tensor:
    """Zero-pad the last axis up to ``total`` entries."""
    n = x.shape[-1]
    widths = [(0, 0)] * (x.ndim - 1) + [(0, total - n)]
    return make_result(np.pad(x.data, widths), [x], lambda g: [g[..., :n]], "pad")


def straight_through(x: Tensor, forward_value: np.ndarray) -> Tensor:
    """Emit ``forward_value`` but pass gradients to ``x`` unchanged."""
    value = np.asarray(forward_value, dtype=x.dtype)
    if value.shape != x.shape:
        raise ValueError(f"straight-through value shape {value.shape} != {x.shape}")
    return make_result(value.copy(), [x], lambda g: [g], "straight_through")


def mse_loss(prediction: Tensor, target) -> Tensor:
    t = np.asarray(_data(target), dtype=prediction.dtype)
    if prediction.shape != np.shape(t):
        raise ValueError(f"mse_loss: shape mismatch {prediction.shape} vs {np.shape(t)}")
    diff = prediction.data - t
    n = diff.size
    value = np.asarray(np.sum(diff * diff) / n, dtype=prediction.dtype)
    parents = [prediction] + ([target] if isinstance(target, Tensor) else [])

    def backward(g):
        d = (2.0 / n) * g * diff
        return [d, -d] if len(parents) == 2 else [d]

    return make_result(value, parents, backward, "mse_loss")
