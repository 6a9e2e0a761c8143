"""Pure-numpy conv kernels; used when the compiled extension is unavailable."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(xp: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Unfold padded ``(N, C, Hp, Wp)`` input into ``(N, C*k*k, Ho*Wo)`` columns."""
    n, c, hp, wp = xp.shape
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    # (N, C, Ho, Wo, k, k) -> (N, C, k, k, Ho, Wo)
    cols = np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3))
    return cols.reshape(n, c * k * k, ho * wo)


def col2im(cols: np.ndarray, padded_shape, k: int, stride: int) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add columns back onto the padded grid."""
    n, c, hp, wp = padded_shape
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    cols = cols.reshape(n, c, k, k, ho, wo)
    out = np.zeros(padded_shape, dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    return out
