"""
Finite-difference gradient check

Compares the taped gradient of a scalar function against central
differences, one coordinate at a time.
"""
from typing import Callable

import numpy as np

from gmar.errors import ParameterError
from gmar.tensor.tape import Tape
from gmar.tensor.tensor import Tensor


def relative_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|a - b| / max(|a|, |b|, 1e-8), elementwise."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def numeric_gradient(f: Callable[[Tensor], Tensor], x, eps: float = 1e-5) -> np.ndarray:
    """Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps)."""
    base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = f(Tensor(base)).item()
        flat[i] = original - eps
        minus = f(Tensor(base)).item()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * eps)
    return grad


def taped_gradient(f: Callable[[Tensor], Tensor], x) -> np.ndarray:
    tape = Tape()
    leaf = tape.watch(x)
    loss = f(leaf)
    return tape.backward(loss)[leaf]


def grad_check(f: Callable[[Tensor], Tensor], x, eps: float = 1e-5) -> float:
    """
    Max relative error between taped and finite-difference gradients.

    `f` must map a Tensor to a single-element Tensor using taped ops.
    """
    if not 0 < eps <= 1e-2:
        raise ParameterError(f"grad_check: eps must lie in (0, 1e-2], got {eps}")
    analytic = taped_gradient(f, x)
    numeric = numeric_gradient(f, x, eps)
    return float(relative_error(analytic, numeric).max())
