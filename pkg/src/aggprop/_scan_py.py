"""Pure-numpy fallbacks for the compiled scan kernels.

Each function folds segments strictly left to right (``np.add.accumulate``
and ``np.maximum.accumulate`` are sequential), so outputs are bit-identical
to the compiled versions in ``_scan``.
"""

from __future__ import annotations

import numpy as np


def seg_cumsum(x, offsets, out):
    for s in range(len(offsets) - 1):
        a, b = offsets[s], offsets[s + 1]
        if b > a:
            np.cumsum(x[a:b], axis=0, out=out[a:b])


def seg_cumsum_init(x, offsets, init, out):
    for s in range(len(offsets) - 1):
        a, b = offsets[s], offsets[s + 1]
        if b > a:
            # prepending the seed keeps the fold order (seed + x0) + x1 + ...
            out[a:b] = np.cumsum(np.vstack([init[s : s + 1], x[a:b]]), axis=0)[1:]


def seg_cumsum_rev(g, offsets, out):
    for s in range(len(offsets) - 1):
        a, b = offsets[s], offsets[s + 1]
        if b > a:
            out[a:b] = np.cumsum(g[a:b][::-1], axis=0)[::-1]


def _cummax_block(block, codes):
    """Running max over rows plus the code of the first providing row.

    ``codes`` assigns an increasing identifier per row; -2 marks "same
    provider as above", so a plain running max forward-fills provenance.
    Ties keep the earlier provider (strict > replaces).
    """
    m = np.maximum.accumulate(block, axis=0)
    is_new = np.empty(block.shape, dtype=bool)
    is_new[0] = True
    is_new[1:] = block[1:] > m[:-1]
    idx = np.where(is_new, codes[:, None], np.int64(-2))
    return m, np.maximum.accumulate(idx, axis=0)


def seg_cummax(x, offsets, out, argsrc):
    for s in range(len(offsets) - 1):
        a, b = offsets[s], offsets[s + 1]
        if b > a:
            codes = np.arange(a, b, dtype=np.int64)
            m, arg = _cummax_block(x[a:b], codes)
            out[a:b] = m
            argsrc[a:b] = arg


def seg_cummax_init(x, offsets, init, out, argsrc):
    for s in range(len(offsets) - 1):
        a, b = offsets[s], offsets[s + 1]
        if b > a:
            block = np.vstack([init[s : s + 1], x[a:b]])
            codes = np.concatenate([[-1], np.arange(a, b)]).astype(np.int64)
            m, arg = _cummax_block(block, codes)
            out[a:b] = m[1:]
            argsrc[a:b] = arg[1:]


def scatter_add(x, idx, out):
    np.add.at(out, idx, x)
