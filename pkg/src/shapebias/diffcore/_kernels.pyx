# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled 3x3 convolution unfolding and 2x2 max-pooling kernels.

Semantics and accumulation order are identical to ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def im2col3x3(const double[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    out_arr = np.zeros((n * h * w, c * 9))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t b, ch, i, j, ki, kj, si, sj, row, col
    for b in range(n):
        for i in range(h):
            for j in range(w):
                row = (b * h + i) * w + j
                for ch in range(c):
                    col = ch * 9
                    for ki in range(3):
                        si = i + ki - 1
                        if si < 0 or si >= h:
                            col += 3
                            continue
                        for kj in range(3):
                            sj = j + kj - 1
                            if 0 <= sj < w:
                                out[row, col] = x[b, ch, si, sj]
                            col += 1
    return out_arr


def col2im3x3(const double[:, ::1] cols, Py_ssize_t n, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w):
    out_arr = np.zeros((n, c, h, w))
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, ch, i, j, ki, kj, si, sj
    # offsets outermost so every pixel accumulates in (ki, kj) order
    for ki in range(3):
        for kj in range(3):
            for b in range(n):
                for ch in range(c):
                    for i in range(h):
                        si = i + ki - 1
                        if si < 0 or si >= h:
                            continue
                        for j in range(w):
                            sj = j + kj - 1
                            if 0 <= sj < w:
                                out[b, ch, si, sj] += cols[(b * h + i) * w + j, ch * 9 + ki * 3 + kj]
    return out_arr


def maxpool2x2(const double[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], ho = x.shape[2] // 2, wo = x.shape[3] // 2
    out_arr = np.empty((n, c, ho, wo))
    idx_arr = np.empty((n, c, ho, wo), dtype=np.int8)
    cdef double[:, :, :, ::1] out = out_arr
    cdef signed char[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t b, ch, i, j
    cdef double best, v
    cdef signed char k
    for b in range(n):
        for ch in range(c):
            for i in range(ho):
                for j in range(wo):
                    best = x[b, ch, 2 * i, 2 * j]
                    k = 0
                    v = x[b, ch, 2 * i, 2 * j + 1]
                    if v > best:
                        best = v
                        k = 1
                    v = x[b, ch, 2 * i + 1, 2 * j]
                    if v > best:
                        best = v
                        k = 2
                    v = x[b, ch, 2 * i + 1, 2 * j + 1]
                    if v > best:
                        best = v
                        k = 3
                    out[b, ch, i, j] = best
                    idx[b, ch, i, j] = k
    return out_arr, idx_arr


def maxpool2x2_backward(const double[:, :, :, ::1] grad, const signed char[:, :, :, ::1] idx):
    cdef Py_ssize_t n = grad.shape[0], c = grad.shape[1], ho = grad.shape[2], wo = grad.shape[3]
    out_arr = np.zeros((n, c, ho * 2, wo * 2))
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, ch, i, j
    cdef signed char k
    for b in range(n):
        for ch in range(c):
            for i in range(ho):
                for j in range(wo):
                    k = idx[b, ch, i, j]
                    out[b, ch, 2 * i + k // 2, 2 * j + k % 2] = grad[b, ch, i, j]
    return out_arr
