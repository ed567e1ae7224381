"""
Differentiable op vocabulary.

Each op computes its result with numpy, wraps it in a new Tensor and, when a
GradTape is active, records a closure returning one gradient per input (or
None for inputs that need none). The vocabulary covers what the dual
encoder, the prompt projections and the contrastive objective use.
"""

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ContractViolation, DegenerateInputError
from .tensor import Tensor, record

LAYER_NORM_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)

Axis = Union[int, Tuple[int, ...], None]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if keep:
        grad = grad.sum(axis=keep, keepdims=True)
    return grad.reshape(shape)


def constant(data) -> Tensor:
    """Wrap array data as a tensor that is never watched."""
    return Tensor(data)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._wrap(a.data + b.data)
    sa, sb = a.shape, b.shape
    return record(out, (a, b), lambda g, n: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._wrap(a.data - b.data)
    sa, sb = a.shape, b.shape
    return record(out, (a, b), lambda g, n: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._wrap(a.data * b.data)
    da, db = a.data, b.data

    def _backward(g, needs):
        return (
            _unbroadcast(g * db, da.shape) if needs[0] else None,
            _unbroadcast(g * da, db.shape) if needs[1] else None,
        )

    return record(out, (a, b), _backward)


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    out = Tensor._wrap(a.data * factor)
    return record(out, (a,), lambda g, n: (g * factor,))


def neg(a: Tensor) -> Tensor:
    out = Tensor._wrap(-a.data)
    return record(out, (a,), lambda g, n: (-g,))


def square(a: Tensor) -> Tensor:
    da = a.data
    out = Tensor._wrap(da * da)
    return record(out, (a,), lambda g, n: (2.0 * g * da,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, broadcasting leading axes."""
    if a.ndim < 2 or b.ndim < 2:
        raise ContractViolation(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ContractViolation(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    da, db = a.data, b.data
    out = Tensor._wrap(np.matmul(da, db))

    def _backward(g, needs):
        grad_a = _unbroadcast(np.matmul(g, np.swapaxes(db, -1, -2)), da.shape) if needs[0] else None
        grad_b = _unbroadcast(np.matmul(np.swapaxes(da, -1, -2), g), db.shape) if needs[1] else None
        return grad_a, grad_b

    return record(out, (a, b), _backward)


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inverse = tuple(int(i) for i in np.argsort(axes))
    out = Tensor._wrap(np.transpose(a.data, axes))
    return record(out, (a,), lambda g, n: (np.transpose(g, inverse),))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    original = a.shape
    out = Tensor._wrap(a.data.reshape(tuple(shape)))
    return record(out, (a,), lambda g, n: (g.reshape(original),))


def broadcast_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    original = a.shape
    out = Tensor._wrap(np.array(np.broadcast_to(a.data, tuple(shape))))
    return record(out, (a,), lambda g, n: (_unbroadcast(g, original),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ContractViolation("concat needs at least one tensor")
    axis = axis % tensors[0].ndim
    out = Tensor._wrap(np.concatenate([t.data for t in tensors], axis=axis))
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(g, needs):
        return tuple(np.split(g, bounds, axis=axis))

    return record(out, tuple(tensors), _backward)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """a[..., start:stop, ...] along one axis."""
    axis = axis % a.ndim
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    original = a.shape
    out = Tensor._wrap(np.array(a.data[index]))

    def _backward(g, needs):
        grad = np.zeros(original, dtype=np.float64)
        grad[index] = g
        return (grad,)

    return record(out, (a,), _backward)


def take_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of a 2-D table: result shape is ids.shape + (table.shape[1],)."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ContractViolation(f"take_rows needs a 2-D table, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ContractViolation(f"row ids out of range for table with {table.shape[0]} rows")
    original = table.shape
    out = Tensor._wrap(table.data[ids])

    def _backward(g, needs):
        grad = np.zeros(original, dtype=np.float64)
        np.add.at(grad, ids.reshape(-1), g.reshape(-1, original[1]))
        return (grad,)

    return record(out, (table,), _backward)


def take_along_last(a: Tensor, index: np.ndarray) -> Tensor:
    """out[...] = a[..., index[...]]; index has shape a.shape[:-1]."""
    index = np.asarray(index, dtype=np.int64)
    if index.shape != a.shape[:-1]:
        raise ContractViolation(f"index shape {index.shape} does not match {a.shape[:-1]}")
    expanded = index[..., None]
    original = a.shape
    out = Tensor._wrap(np.take_along_axis(a.data, expanded, axis=-1)[..., 0])

    def _backward(g, needs):
        grad = np.zeros(original, dtype=np.float64)
        np.put_along_axis(grad, expanded, g[..., None], axis=-1)
        return (grad,)

    return record(out, (a,), _backward)


def gather_positions(x: Tensor, positions: np.ndarray) -> Tensor:
    """Pick one sequence position per batch row: (B, n, d) -> (B, d)."""
    positions = np.asarray(positions, dtype=np.int64)
    if x.ndim != 3 or positions.shape != (x.shape[0],):
        raise ContractViolation(f"gather_positions got x {x.shape} and positions {positions.shape}")
    index = np.broadcast_to(positions[:, None, None], (x.shape[0], 1, x.shape[2]))
    original = x.shape
    out = Tensor._wrap(np.take_along_axis(x.data, index, axis=1)[:, 0, :])

    def _backward(g, needs):
        grad = np.zeros(original, dtype=np.float64)
        np.put_along_axis(grad, index, g[:, None, :], axis=1)
        return (grad,)

    return record(out, (x,), _backward)


def _expand_reduced(g: np.ndarray, shape: Tuple[int, ...], axis: Axis, keepdims: bool):
    if axis is None:
        return np.broadcast_to(g, shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(ax % len(shape) for ax in axes)
    if not keepdims:
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def sum(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    original = a.shape
    out = Tensor._wrap(np.sum(a.data, axis=axis, keepdims=keepdims))
    return record(out, (a,), lambda g, n: (np.array(_expand_reduced(g, original, axis, keepdims)),))


def mean(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize over the last axis, then apply elementwise gain and bias."""
    dx = x.data
    mu = dx.mean(axis=-1, keepdims=True)
    centered = dx - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    dg = gain.data
    out = Tensor._wrap(xhat * dg + bias.data)
    width = dx.shape[-1]

    def _backward(g, needs):
        grad_x = grad_gain = grad_bias = None
        if needs[0]:
            dxhat = g * dg
            grad_x = inv * (
                dxhat
                - dxhat.sum(axis=-1, keepdims=True) / width
                - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True) / width
            )
        if needs[1]:
            grad_gain = _unbroadcast(g * xhat, dg.shape)
        if needs[2]:
            grad_bias = _unbroadcast(g, bias.shape)
        return grad_x, grad_gain, grad_bias

    return record(out, (x, gain, bias), _backward)


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    dx = x.data
    inner = _GELU_C * (dx + 0.044715 * dx**3)
    t = np.tanh(inner)
    out = Tensor._wrap(0.5 * dx * (1.0 + t))

    def _backward(g, needs):
        d_inner = _GELU_C * (1.0 + 3.0 * 0.044715 * dx * dx)
        return (g * (0.5 * (1.0 + t) + 0.5 * dx * (1.0 - t * t) * d_inner),)

    return record(out, (x,), _backward)


def _check_temperature(tau: float) -> float:
    tau = float(tau)
    if not tau > 0.0:
        raise ContractViolation(f"temperature must be positive, got {tau}")
    return tau


def softmax(scores: Tensor, tau: float = 1.0, axis: int = -1) -> Tensor:
    """
    p_c = exp(s_c / tau) / sum_k exp(s_k / tau) along `axis`.

    Uses max-subtraction, so adding a constant to every score leaves the
    result unchanged up to rounding.
    """
    tau = _check_temperature(tau)
    z = scores.data / tau if tau != 1.0 else scores.data
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor._wrap(y)

    def _backward(g, needs):
        dz = y * (g - (g * y).sum(axis=axis, keepdims=True))
        return (dz / tau if tau != 1.0 else dz,)

    return record(out, (scores,), _backward)


def log_softmax(scores: Tensor, tau: float = 1.0, axis: int = -1) -> Tensor:
    tau = _check_temperature(tau)
    z = scores.data / tau if tau != 1.0 else scores.data
    shifted = z - z.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse
    out = Tensor._wrap(y)
    probs = np.exp(y)

    def _backward(g, needs):
        dz = g - probs * g.sum(axis=axis, keepdims=True)
        return (dz / tau if tau != 1.0 else dz,)

    return record(out, (scores,), _backward)


def l2_normalize(x: Tensor, axis: int = -1) -> Tensor:
    """x / ||x|| along `axis`; zero vectors are rejected."""
    dx = x.data
    norm = np.sqrt((dx * dx).sum(axis=axis, keepdims=True))
    if np.any(norm == 0.0):
        raise DegenerateInputError("cannot normalize a zero vector")
    y = dx / norm
    out = Tensor._wrap(y)

    def _backward(g, needs):
        return ((g - y * (g * y).sum(axis=axis, keepdims=True)) / norm,)

    return record(out, (x,), _backward)
