"""Dense-tensor primitives with reverse-mode differentiation.

Just enough of an engine for this package's forward/backward passes: plain
numpy arrays wrapped in :class:`Tensor`, a :class:`Tape` that records every
primitive applied while active, and :func:`backward` to accumulate gradients
by replaying the records in reverse. 64-bit floats are the default; 32-bit
is opt-in per tensor. No general broadcasting -- the few mixed-shape cases
the model needs (row bias, per-row scaling) are dedicated primitives.
"""

from __future__ import annotations

import threading

import numpy as np
from scipy.special import expit

from . import backend

DEFAULT_DTYPE = np.float64
_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

_tls = threading.local()

_check_finite = False


def set_finite_checks(enabled: bool) -> None:
    """Validate that every primitive output is finite (off by default)."""
    global _check_finite
    _check_finite = enabled


class ShapeError(ValueError):
    """Raised when primitive inputs have incompatible shapes."""


class Tensor:
    __slots__ = ("data",)

    def __init__(self, data, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) and dtype is None else Tensor(x if not isinstance(x, Tensor) else x.data, dtype)


class Tape:
    """Ordered record of primitives, replayed backward to accumulate grads.

    Single-writer: one forward/backward pass at a time. Independent tapes on
    separate threads are fine (the active-tape stack is thread-local).
    """

    def __init__(self):
        self._records = []  # (out, inputs, vjp)
        self._watched = []

    def watch(self, *tensors: Tensor) -> None:
        for t in tensors:
            if not isinstance(t, Tensor):
                raise TypeError("can only watch Tensors")
            self._watched.append(t)

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        _tape_stack().pop()
        return False

    def backward(self, loss: Tensor):
        return backward(self, loss)


def _tape_stack() -> list:
    stack = getattr(_tls, "stack", None)
    if stack is None:
        stack = _tls.stack = []
    return stack


def active_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


def _emit(out_data, inputs, vjp) -> Tensor:
    if _check_finite and not np.all(np.isfinite(out_data)):
        raise FloatingPointError("primitive produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = out_data
    tape = active_tape()
    if tape is not None:
        tape._records.append((out, inputs, vjp))
    return out


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Accumulate d(loss)/d(param) for every watched tensor.

    Non-participating watched tensors map to zero arrays.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    grads: dict[Tensor, np.ndarray] = {loss: np.ones_like(loss.data)}
    for out, inputs, vjp in reversed(tape._records):
        g = grads.pop(out, None)
        if g is None:
            continue
        for t, ig in zip(inputs, vjp(g)):
            if ig is None or not isinstance(t, Tensor):
                continue
            held = grads.get(t)
            grads[t] = ig if held is None else held + ig
    return {p: grads.get(p, np.zeros_like(p.data)) for p in tape._watched}


def _require_same_shape(op, a, b):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: incompatible shapes {a.data.shape} and {b.data.shape}")


def _require_same_dtype(op, a, b):
    if a.data.dtype != b.data.dtype:
        raise ShapeError(f"{op}: mixed dtypes {a.data.dtype} and {b.data.dtype}")


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; a 1-D ``b`` matching the last axis acts as a row bias."""
    _require_same_dtype("add", a, b)
    if a.data.shape == b.data.shape:
        return _emit(a.data + b.data, (a, b), lambda g: (g, g))
    if a.data.ndim == 2 and b.data.shape == (a.data.shape[1],):
        return _emit(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)))
    raise ShapeError(f"add: incompatible shapes {a.data.shape} and {b.data.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_dtype("sub", a, b)
    _require_same_shape("sub", a, b)
    return _emit(a.data - b.data, (a, b), lambda g: (g, -g))


def neg(a: Tensor) -> Tensor:
    return _emit(-a.data, (a,), lambda g: (-g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_dtype("mul", a, b)
    _require_same_shape("mul", a, b)
    return _emit(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, c: float) -> Tensor:
    return _emit(a.data * c, (a,), lambda g: (g * c,))


def rowmul(a: Tensor, c: Tensor) -> Tensor:
    """Scale each row of ``a`` (N, d) by ``c`` (N,)."""
    if a.data.ndim != 2 or c.data.shape != (a.data.shape[0],):
        raise ShapeError(f"rowmul: incompatible shapes {a.data.shape} and {c.data.shape}")
    col = c.data[:, None]
    return _emit(a.data * col, (a, c), lambda g: (g * col, (g * a.data).sum(axis=1)))


def rowdiv(a: Tensor, c: Tensor) -> Tensor:
    """Divide each row of ``a`` (N, d) by ``c`` (N,)."""
    if a.data.ndim != 2 or c.data.shape != (a.data.shape[0],):
        raise ShapeError(f"rowdiv: incompatible shapes {a.data.shape} and {c.data.shape}")
    col = c.data[:, None]
    out = a.data / col

    def vjp(g):
        return g / col, -(g * out).sum(axis=1) / c.data

    return _emit(out, (a, c), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_dtype("matmul", a, b)
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {ad.shape} and {bd.shape}")
        return _emit(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))
    if ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {ad.shape} and {bd.shape}")
        return _emit(ad @ bd, (a, b), lambda g: (np.outer(g, bd), ad.T @ g))
    raise ShapeError(f"matmul: unsupported ranks {ad.shape} and {bd.shape}")


def concat(parts, axis: int = -1) -> Tensor:
    """Concatenate tensors along the feature axis (or axis 0 for vectors)."""
    parts = list(parts)
    if not parts:
        raise ShapeError("concat: no inputs")
    for p in parts[1:]:
        _require_same_dtype("concat", parts[0], p)
    ax = axis if axis >= 0 else parts[0].data.ndim + axis
    sizes = [p.data.shape[ax] for p in parts]
    splits = np.cumsum(sizes)[:-1]
    try:
        out = np.concatenate([p.data for p in parts], axis=ax)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from None
    return _emit(out, tuple(parts), lambda g: tuple(np.split(g, splits, axis=ax)))


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.data.shape
    return _emit(a.data.reshape(shape), (a,), lambda g: (g.reshape(orig),))


# ---------------------------------------------------------------------------
# nonlinearities


def cos(a: Tensor) -> Tensor:
    return _emit(np.cos(a.data), (a,), lambda g: (-np.sin(a.data) * g,))


def sigmoid(a: Tensor) -> Tensor:
    y = expit(a.data)
    return _emit(y, (a,), lambda g: (y * (1.0 - y) * g,))


def log_sigmoid(a: Tensor) -> Tensor:
    x = a.data
    y = np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))
    return _emit(y.astype(x.dtype, copy=False), (a,), lambda g: (expit(-x) * g,))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _emit(y, (a,), lambda g: (y * g,))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    x = a.data
    factor = np.where(x > 0, x.dtype.type(1.0), x.dtype.type(slope))
    return _emit(x * factor, (a,), lambda g: (g * factor,))


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; on ties the gradient goes to the first argument."""
    _require_same_dtype("maximum", a, b)
    _require_same_shape("maximum", a, b)
    take_a = a.data >= b.data
    return _emit(np.where(take_a, a.data, b.data), (a, b),
                 lambda g: (np.where(take_a, g, 0.0), np.where(take_a, 0.0, g)))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.data >= lo) & (a.data <= hi)
    return _emit(np.clip(a.data, lo, hi), (a,), lambda g: (np.where(inside, g, 0.0),))


def dropout(a: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout: kept activations are rescaled by 1/(1-p) in training."""
    if not training or p <= 0.0:
        return a
    mask = (rng.random(a.data.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    return _emit(a.data * mask, (a,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# reductions and indexed ops


def tsum(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        return _emit(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, a.data.shape).copy(),))
    out = a.data.sum(axis=axis)
    return _emit(out, (a,), lambda g: (np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy(),))


def mean(a: Tensor) -> Tensor:
    return scale(tsum(a), 1.0 / a.data.size)


def gather_rows(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    n = a.data.shape[0]
    return _emit(a.data[idx], (a,), lambda g: (backend.scatter_add_rows(g, idx, n),))


def scatter_add_rows(a: Tensor, idx, n_rows: int) -> Tensor:
    """Sum rows of ``a`` into ``n_rows`` output slots given by ``idx``."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.shape[0] != a.data.shape[0]:
        raise ShapeError(f"scatter_add_rows: {a.data.shape[0]} rows vs {idx.shape[0]} indices")
    return _emit(backend.scatter_add_rows(a.data, idx, n_rows), (a,), lambda g: (g[idx],))


def segment_cumsum(a: Tensor, offsets, init: Tensor | None = None) -> Tensor:
    """Running per-segment sum of rows; optional per-segment seed rows."""
    offsets = np.asarray(offsets, dtype=np.int64)
    if init is None:
        out = backend.segment_cumsum(a.data, offsets)
        return _emit(out, (a,), lambda g: (backend.segment_cumsum_backward(g, offsets),))
    out = backend.segment_cumsum(a.data, offsets, init.data)

    def vjp(g):
        return backend.segment_cumsum_backward(g, offsets), _segment_sum(g, offsets)

    return _emit(out, (a, init), vjp)


def segment_cummax(a: Tensor, offsets, init: Tensor | None = None) -> Tensor:
    """Running per-segment elementwise max; ties keep the earliest provider."""
    offsets = np.asarray(offsets, dtype=np.int64)
    n = a.data.shape[0]
    if init is None:
        out, argsrc = backend.segment_cummax(a.data, offsets)
        return _emit(out, (a,), lambda g: (backend.segment_cummax_backward(g, argsrc, n),))
    out, argsrc = backend.segment_cummax(a.data, offsets, init.data)

    def vjp(g):
        return (backend.segment_cummax_backward(g, argsrc, n),
                _seed_max_grad(g, argsrc, offsets, init.data.shape))

    return _emit(out, (a, init), vjp)


def _segment_sum(g, offsets):
    """Sum rows per segment (guarding np.add.reduceat's empty-slice quirk)."""
    g2 = g if g.ndim == 2 else g[:, None]
    lengths = np.diff(offsets)
    out = np.zeros((len(lengths), g2.shape[1]), dtype=g2.dtype)
    nonempty = lengths > 0
    if nonempty.any():
        starts = offsets[:-1][nonempty].astype(np.intp)
        out[nonempty] = np.add.reduceat(g2, starts, axis=0)[: nonempty.sum()] if len(starts) == 1 else np.add.reduceat(g2, starts, axis=0)
        # reduceat sums to the next start, which may span empty segments; redo precisely
        out[nonempty] = np.stack([g2[offsets[s]: offsets[s + 1]].sum(axis=0) for s in np.flatnonzero(nonempty)])
    return out if g.ndim == 2 else out[:, 0]


def _seed_max_grad(g, argsrc, offsets, init_shape):
    g2 = g if g.ndim == 2 else g[:, None]
    arg2 = argsrc if argsrc.ndim == 2 else argsrc[:, None]
    out = np.zeros(init_shape if len(init_shape) == 2 else (init_shape[0], 1), dtype=g2.dtype)
    seg_id = np.repeat(np.arange(len(offsets) - 1), np.diff(offsets))
    mask = arg2 == -1
    if mask.any():
        rows, cols = np.nonzero(mask)
        np.add.at(out, (seg_id[rows], cols), g2[rows, cols])
    return out if len(init_shape) == 2 else out[:, 0]
