"""Backend selection for the scan kernels.

The compiled Cython extension (``aggprop._scan``) is preferred; the
pure-numpy module (``aggprop._scan_py``) is the fallback when the extension
was not built. Set ``AGGPROP_BACKEND=pure`` (or ``compiled``) to force one,
or call :func:`set_backend` at runtime (used by the benchmark suite to
compare both).
"""

from __future__ import annotations

import os

import numpy as np

from . import _scan_py

try:
    from . import _scan  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:
    _scan = None
    HAVE_COMPILED = False


def _default_backend() -> str:
    forced = os.environ.get("AGGPROP_BACKEND", "").strip().lower()
    if forced in ("pure", "compiled"):
        if forced == "compiled" and not HAVE_COMPILED:
            raise ImportError("AGGPROP_BACKEND=compiled but aggprop._scan is not built")
        return forced
    return "compiled" if HAVE_COMPILED else "pure"


_active = _default_backend()


def available_backends() -> tuple[str, ...]:
    return ("compiled", "pure") if HAVE_COMPILED else ("pure",)


def get_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in available_backends():
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active = name


def _impl():
    return _scan if _active == "compiled" else _scan_py


def _as_matrix(x):
    x = np.ascontiguousarray(x)
    if x.ndim == 1:
        return x[:, None], True
    if x.ndim != 2:
        raise ValueError(f"scan kernels expect 1-D or 2-D input, got shape {x.shape}")
    return x, False


def _offsets(offsets, n_rows: int):
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    if len(offsets) == 0 or offsets[0] != 0 or offsets[-1] != n_rows:
        raise ValueError(f"bad segment offsets: first/last must be 0/{n_rows}")
    return offsets


def segment_cumsum(x, offsets, init=None):
    """Per-segment running sum of rows; ``init`` seeds each segment."""
    x, squeeze = _as_matrix(x)
    offsets = _offsets(offsets, x.shape[0])
    out = np.empty_like(x)
    if init is None:
        _impl().seg_cumsum(x, offsets, out)
    else:
        init = np.ascontiguousarray(init, dtype=x.dtype)
        init = init[:, None] if init.ndim == 1 else init
        _impl().seg_cumsum_init(x, offsets, init, out)
    return out[:, 0] if squeeze else out


def segment_cumsum_backward(g, offsets):
    """Suffix sums per segment (adjoint of :func:`segment_cumsum`)."""
    g, squeeze = _as_matrix(g)
    offsets = _offsets(offsets, g.shape[0])
    out = np.empty_like(g)
    _impl().seg_cumsum_rev(g, offsets, out)
    return out[:, 0] if squeeze else out


def segment_cummax(x, offsets, init=None):
    """Per-segment running elementwise max.

    Returns ``(out, argsrc)`` where ``argsrc[i, j]`` is the row that provides
    ``out[i, j]`` (-1 means the seed row; ties keep the earliest provider).
    """
    x, squeeze = _as_matrix(x)
    offsets = _offsets(offsets, x.shape[0])
    out = np.empty_like(x)
    argsrc = np.empty(x.shape, dtype=np.int64)
    if init is None:
        _impl().seg_cummax(x, offsets, out, argsrc)
    else:
        init = np.ascontiguousarray(init, dtype=x.dtype)
        init = init[:, None] if init.ndim == 1 else init
        _impl().seg_cummax_init(x, offsets, init, out, argsrc)
    if squeeze:
        return out[:, 0], argsrc[:, 0]
    return out, argsrc


def segment_cummax_backward(g, argsrc, n_rows: int):
    """Scatter output gradients back to the providing rows (seed rows drop)."""
    g, squeeze = _as_matrix(g)
    argsrc = argsrc[:, None] if argsrc.ndim == 1 else argsrc
    out = np.zeros((n_rows, g.shape[1]), dtype=g.dtype)
    mask = argsrc >= 0
    if mask.any():
        cols = np.broadcast_to(np.arange(g.shape[1]), g.shape)
        np.add.at(out, (argsrc[mask], cols[mask]), g[mask])
    return out[:, 0] if squeeze else out


def scatter_add_rows(x, idx, n_rows: int):
    """out[idx[i]] += x[i] with deterministic (row order) accumulation."""
    x, squeeze = _as_matrix(x)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if idx.shape[0] != x.shape[0]:
        raise ValueError(f"scatter_add_rows: {x.shape[0]} rows vs {idx.shape[0]} indices")
    out = np.zeros((n_rows, x.shape[1]), dtype=x.dtype)
    _impl().scatter_add(x, idx, out)
    return out[:, 0] if squeeze else out
