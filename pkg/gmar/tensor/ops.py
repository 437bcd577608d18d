"""
Tensor Ops - forward values and their vector-Jacobian products

Every op accepts Tensors (or array-likes, treated as constants), computes
its value in float64 and, when any input is taped, appends a node whose
vjp closure keeps the values the backward rule needs.

Broadcasting is explicit: elementwise ops require equal shapes and
`broadcast_to` is the only way to expand an operand. `matmul` additionally
accepts a rank-2 right operand against a batched left operand.
"""
import builtins
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import erf

from gmar.config import LAYERNORM_EPS
from gmar.errors import DimensionError, ParameterError
from gmar.tensor.tensor import Tensor, as_tensor

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _emit(op: str, parents: Sequence[Tensor], out: np.ndarray, vjp) -> Tensor:
    tape = next((p.tape for p in parents if p.tape is not None), None)
    if tape is None:
        return Tensor(out, copy=False)
    return tape.record(op, parents, out, vjp)


def _same_shape(op: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _sum_to_shape(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape`."""
    lead = grad.ndim - len(shape)
    if lead > 0:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """
    Matrix product over the last two axes.

    Leading batch dims must be equal, or `b` must be rank 2 (a weight
    matrix shared across the batch of `a`).
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    shared = b.ndim == 2 and a.ndim > 2
    if not shared and a.shape[:-2] != b.shape[:-2]:
        raise DimensionError(
            f"matmul: batch dims differ between {a.shape} and {b.shape}"
        )
    out = np.matmul(a.data, b.data)

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2)) if a.taped else None
        gb = None
        if b.taped:
            if shared:
                k, n = b.shape
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
            else:
                gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return ga, gb

    return _emit("matmul", (a, b), out, vjp)


# ---------------------------------------------------------------------------
# Elementwise
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("add", a, b)
    return _emit("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("sub", a, b)
    return _emit("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def neg(x) -> Tensor:
    x = as_tensor(x)
    return _emit("neg", (x,), -x.data, lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("mul", a, b)
    return _emit("mul", (a, b), a.data * b.data, lambda g: (g * b.data, g * a.data))


def mul_scalar(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    return _emit("mul_scalar", (x,), x.data * c, lambda g: (g * c,))


def abs(x) -> Tensor:
    """|x|; the backward rule uses sign(x), which is 0 at exactly 0."""
    x = as_tensor(x)
    sign = np.sign(x.data)
    return _emit("abs", (x,), np.abs(x.data), lambda g: (g * sign,))


def square(x) -> Tensor:
    x = as_tensor(x)
    return _emit("square", (x,), x.data * x.data, lambda g: (2.0 * x.data * g,))


def sqrt_scalar(x) -> Tensor:
    """Square root of a single-element tensor. Gradient at 0 is taken as 0."""
    x = as_tensor(x)
    if x.size != 1:
        raise DimensionError(f"sqrt_scalar: expected one element, got shape {x.shape}")
    if x.item() < 0:
        raise ParameterError(f"sqrt_scalar: negative input {x.item()}")
    out = np.sqrt(x.data)

    def vjp(g):
        return (np.where(out > 0, 0.5 * g / np.where(out > 0, out, 1.0), 0.0),)

    return _emit("sqrt_scalar", (x,), out, vjp)


def gelu(x) -> Tensor:
    """Exact GELU, x * Phi(x), with Phi the standard normal CDF."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    out = x.data * cdf

    def vjp(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return _emit("gelu", (x,), out, vjp)


# ---------------------------------------------------------------------------
# Normalizations
# ---------------------------------------------------------------------------

def softmax_lastdim(x) -> Tensor:
    """Softmax over the last axis, with max-subtraction."""
    x = as_tensor(x)
    if x.ndim == 0:
        raise DimensionError("softmax_lastdim: tensor has no last dimension")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _emit("softmax", (x,), y, vjp)


def log_softmax_lastdim(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim == 0:
        raise DimensionError("log_softmax_lastdim: tensor has no last dimension")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - log_z

    def vjp(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return _emit("log_softmax", (x,), out, vjp)


def layernorm(x, gamma, beta, eps: float = LAYERNORM_EPS) -> Tensor:
    """
    Per-row normalization over the last axis, then gamma * xhat + beta.

    Variance is the population variance; a constant row maps to beta.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if eps <= 0:
        raise ParameterError(f"layernorm: eps must be > 0, got {eps}")
    d = x.shape[-1] if x.ndim else 0
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(
            f"layernorm: gamma {gamma.shape} / beta {beta.shape} do not match last dim of {x.shape}"
        )
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gamma.data + beta.data

    def vjp(g):
        gxhat = g * gamma.data
        gx = inv_std * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        ggamma = (g * xhat).reshape(-1, d).sum(axis=0)
        gbeta = g.reshape(-1, d).sum(axis=0)
        return gx, ggamma, gbeta

    return _emit("layernorm", (x, gamma, beta), out, vjp)


# ---------------------------------------------------------------------------
# Shape ops
# ---------------------------------------------------------------------------

def transpose_last2(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim < 2:
        raise DimensionError(f"transpose_last2: need rank >= 2, got {x.shape}")
    out = np.swapaxes(x.data, -1, -2)
    return _emit("transpose_last2", (x,), out, lambda g: (np.swapaxes(g, -1, -2),))


def permute(x, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise DimensionError(f"permute: {axes} is not a permutation of {x.ndim} axes")
    inverse = tuple(np.argsort(axes))
    out = np.transpose(x.data, axes)
    return _emit("permute", (x,), out, lambda g: (np.transpose(g, inverse),))


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise DimensionError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None
    original = x.shape
    return _emit("reshape", (x,), out, lambda g: (g.reshape(original),))


def slice(x, axis: int, start: int, stop: int) -> Tensor:
    """x[..., start:stop, ...] along `axis`."""
    x = as_tensor(x)
    axis = axis % x.ndim
    if not 0 <= start < stop <= x.shape[axis]:
        raise DimensionError(
            f"slice: [{start}:{stop}] out of range for axis {axis} of {x.shape}"
        )
    index = [builtins.slice(None)] * x.ndim
    index[axis] = builtins.slice(start, stop)
    index = tuple(index)
    out = x.data[index]

    def vjp(g):
        full = np.zeros(x.shape)
        full[index] = g
        return (full,)

    return _emit("slice", (x,), out, vjp)


def concat(tensors: Sequence, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat: nothing to concatenate")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise DimensionError(
                f"concat: shapes {[t.shape for t in tensors]} differ off axis {axis}"
            )
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _emit("concat", tensors, out, vjp)


def broadcast_to(x, shape: Sequence[int]) -> Tensor:
    """Explicit expansion (numpy rules); backward sums over expanded axes."""
    x = as_tensor(x)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError:
        raise DimensionError(f"broadcast_to: cannot expand {x.shape} to {shape}") from None
    original = x.shape
    return _emit("broadcast_to", (x,), out, lambda g: (_sum_to_shape(g, original),))


def sum_axis(x, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    """Sum over one axis, or over everything when `axis` is None."""
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _emit("sum", (x,), np.asarray(out), vjp)


def mean_axis(x, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    out = x.data.mean(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return _emit("mean", (x,), np.asarray(out), vjp)


def gather_lastdim(x, indices) -> Tensor:
    """Pick one entry per row of the last axis: out[...] = x[..., indices[...]]."""
    x = as_tensor(x)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.shape != x.shape[:-1]:
        raise DimensionError(f"gather_lastdim: indices {idx.shape} vs rows {x.shape[:-1]}")
    if np.any(idx < 0) or np.any(idx >= x.shape[-1]):
        raise ParameterError(f"gather_lastdim: index out of range [0, {x.shape[-1]})")
    out = np.take_along_axis(x.data, idx[..., None], axis=-1)[..., 0]

    def vjp(g):
        full = np.zeros(x.shape)
        np.put_along_axis(full, idx[..., None], np.asarray(g)[..., None], axis=-1)
        return (full,)

    return _emit("gather", (x,), out, vjp)
