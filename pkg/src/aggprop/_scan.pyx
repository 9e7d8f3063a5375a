# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for segmented scans and row scatter-add.

All scans walk each segment strictly left to right (one accumulator per
column), so results are bit-identical to the pure-python fallbacks in
``_scan_py`` which fold in the same order.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double


def seg_cumsum(const real[:, ::1] x, const cnp.int64_t[::1] offsets, real[:, ::1] out):
    cdef Py_ssize_t s, i, j, a, b
    cdef Py_ssize_t d = x.shape[1]
    for s in range(offsets.shape[0] - 1):
        a = offsets[s]
        b = offsets[s + 1]
        if b <= a:
            continue
        for j in range(d):
            out[a, j] = x[a, j]
        for i in range(a + 1, b):
            for j in range(d):
                out[i, j] = out[i - 1, j] + x[i, j]


def seg_cumsum_init(const real[:, ::1] x, const cnp.int64_t[::1] offsets,
                    const real[:, ::1] init, real[:, ::1] out):
    cdef Py_ssize_t s, i, j, a, b
    cdef Py_ssize_t d = x.shape[1]
    for s in range(offsets.shape[0] - 1):
        a = offsets[s]
        b = offsets[s + 1]
        if b <= a:
            continue
        for j in range(d):
            out[a, j] = init[s, j] + x[a, j]
        for i in range(a + 1, b):
            for j in range(d):
                out[i, j] = out[i - 1, j] + x[i, j]


def seg_cumsum_rev(const real[:, ::1] g, const cnp.int64_t[::1] offsets, real[:, ::1] out):
    """Suffix sums per segment (adjoint of seg_cumsum)."""
    cdef Py_ssize_t s, i, j, a, b
    cdef Py_ssize_t d = g.shape[1]
    for s in range(offsets.shape[0] - 1):
        a = offsets[s]
        b = offsets[s + 1]
        if b <= a:
            continue
        for j in range(d):
            out[b - 1, j] = g[b - 1, j]
        for i in range(b - 2, a - 1, -1):
            for j in range(d):
                out[i, j] = out[i + 1, j] + g[i, j]


def seg_cummax(const real[:, ::1] x, const cnp.int64_t[::1] offsets,
               real[:, ::1] out, cnp.int64_t[:, ::1] argsrc):
    """Running elementwise max per segment; argsrc holds the providing row.

    Ties keep the earlier provider (strict > replaces).
    """
    cdef Py_ssize_t s, i, j, a, b
    cdef Py_ssize_t d = x.shape[1]
    for s in range(offsets.shape[0] - 1):
        a = offsets[s]
        b = offsets[s + 1]
        if b <= a:
            continue
        for j in range(d):
            out[a, j] = x[a, j]
            argsrc[a, j] = a
        for i in range(a + 1, b):
            for j in range(d):
                if x[i, j] > out[i - 1, j]:
                    out[i, j] = x[i, j]
                    argsrc[i, j] = i
                else:
                    out[i, j] = out[i - 1, j]
                    argsrc[i, j] = argsrc[i - 1, j]


def seg_cummax_init(const real[:, ::1] x, const cnp.int64_t[::1] offsets,
                    const real[:, ::1] init, real[:, ::1] out, cnp.int64_t[:, ::1] argsrc):
    """Seeded running max; argsrc is -1 where the seed still provides the max."""
    cdef Py_ssize_t s, i, j, a, b
    cdef Py_ssize_t d = x.shape[1]
    for s in range(offsets.shape[0] - 1):
        a = offsets[s]
        b = offsets[s + 1]
        if b <= a:
            continue
        for j in range(d):
            if x[a, j] > init[s, j]:
                out[a, j] = x[a, j]
                argsrc[a, j] = a
            else:
                out[a, j] = init[s, j]
                argsrc[a, j] = -1
        for i in range(a + 1, b):
            for j in range(d):
                if x[i, j] > out[i - 1, j]:
                    out[i, j] = x[i, j]
                    argsrc[i, j] = i
                else:
                    out[i, j] = out[i - 1, j]
                    argsrc[i, j] = argsrc[i - 1, j]


def scatter_add(const real[:, ::1] x, const cnp.int64_t[::1] idx, real[:, ::1] out):
    """out[idx[i]] += x[i], applied strictly in row order."""
    cdef Py_ssize_t i, j, r
    cdef Py_ssize_t d = x.shape[1]
    for i in range(x.shape[0]):
        r = idx[i]
        for j in range(d):
            out[r, j] += x[i, j]
