# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled im2col / col2im kernels (float32 and float64)."""

import numpy as np
cimport cython
from libc.string cimport memcpy

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] xp, int k, int stride):
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1], hp = xp.shape[2], wp = xp.shape[3]
    cdef Py_ssize_t ho = (hp - k) // stride + 1
    cdef Py_ssize_t wo = (wp - k) // stride + 1
    dtype = np.float32 if real is float else np.float64
    out = np.empty((n, c * k * k, ho * wo), dtype=dtype)
    cdef real[:, :, ::1] cols = out
    cdef Py_ssize_t b, ch, i, j, y, x
    cdef real *src
    cdef real *dst
    if n == 0 or c == 0 or ho <= 0 or wo <= 0:
        return out
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(k):
                    for j in range(k):
                        dst = &cols[b, (ch * k + i) * k + j, 0]
                        for y in range(ho):
                            src = &xp[b, ch, y * stride + i, j]
                            if stride == 1:
                                memcpy(dst, src, wo * sizeof(real))
                            else:
                                for x in range(wo):
                                    dst[x] = src[x * stride]
                            dst += wo
    return out


def col2im(real[:, :, ::1] cols, tuple padded_shape, int k, int stride):
    cdef Py_ssize_t n = padded_shape[0], c = padded_shape[1]
    cdef Py_ssize_t hp = padded_shape[2], wp = padded_shape[3]
    cdef Py_ssize_t ho = (hp - k) // stride + 1
    cdef Py_ssize_t wo = (wp - k) // stride + 1
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((n, c, hp, wp), dtype=dtype)
    cdef real[:, :, :, ::1] xp = out
    cdef Py_ssize_t b, ch, i, j, y, x
    cdef real *src
    cdef real *dst
    if n == 0 or c == 0 or ho <= 0 or wo <= 0:
        return out
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(k):
                    for j in range(k):
                        src = &cols[b, (ch * k + i) * k + j, 0]
                        for y in range(ho):
                            dst = &xp[b, ch, y * stride + i, j]
                            for x in range(wo):
                                dst[x * stride] += src[x]
                            src += wo
    return out
