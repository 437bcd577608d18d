"""
Objective and optimizer - cross-entropy and Adam with bias correction
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from gmar.errors import ContractError, ParameterError
from gmar.tensor import Tensor, ops

LR_SCHEDULES = ("constant", "cosine")


def cross_entropy(logits, labels: Union[int, Sequence[int]]) -> Tensor:
    """
    Mean of -log softmax(logits)[label].

    `logits` is [C] with one int label, or [B, C] with B labels. Taped
    whenever `logits` is.
    """
    logits = logits if isinstance(logits, Tensor) else Tensor(logits)
    single = logits.ndim == 1
    if single:
        logits = ops.reshape(logits, (1, logits.shape[0]))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    num_classes = logits.shape[-1]
    if labels.shape != (logits.shape[0],):
        raise ParameterError(f"{labels.size} labels for {logits.shape[0]} rows of logits")
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ParameterError(f"label outside [0, {num_classes})")

    picked = ops.gather_lastdim(ops.log_softmax_lastdim(logits), labels)
    return ops.neg(ops.mean_axis(picked))


@dataclass
class AdamState:
    """First and second moments per parameter name; `step` counts updates taken."""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a, dtype=np.float64) for k, a in params.items()},
            v={k: np.zeros_like(a, dtype=np.float64) for k, a in params.items()},
        )


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState,
              config, step_index: int,
              learning_rate: Optional[float] = None) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One Adam update; returns new parameter arrays and a new state.

    p <- p - lr * m_hat / (sqrt(v_hat) + eps), with m_hat, v_hat the
    bias-corrected moments at `step_index` (1-based). `config` needs
    learning_rate, beta1, beta2 and epsilon; an explicit `learning_rate`
    (from a schedule) takes the place of config.learning_rate.
    """
    if step_index < 1:
        raise ParameterError(f"step_index must be >= 1, got {step_index}")
    if set(params) != set(grads):
        raise ContractError("params and grads name different tensors")

    lr = config.learning_rate if learning_rate is None else learning_rate
    b1, b2, eps = config.beta1, config.beta2, config.epsilon
    correction1 = 1.0 - b1 ** step_index
    correction2 = 1.0 - b2 ** step_index

    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != np.shape(value):
            raise ContractError(f"{name}: gradient {grad.shape} vs parameter {np.shape(value)}")
        m = b1 * state.m.get(name, 0.0) + (1.0 - b1) * grad
        v = b2 * state.v.get(name, 0.0) + (1.0 - b2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, step_index)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values())))


def clip_by_global_norm(grads: Mapping[str, np.ndarray],
                        max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    """
    Scale every gradient by min(1, max_norm / ||grads||).

    Returns the (possibly) rescaled gradients and the norm before clipping.
    """
    if not max_norm > 0:
        raise ParameterError(f"max_norm must be > 0, got {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm:
        return dict(grads), norm
    scale = max_norm / norm
    return {name: np.asarray(g, dtype=np.float64) * scale for name, g in grads.items()}, norm


def scheduled_learning_rate(peak: float, step_index: int, total_steps: int, warmup_steps: int = 0,
                            schedule: str = "constant") -> float:
    """
    Learning rate for 1-based `step_index` out of `total_steps`.

    Linear warmup from peak / warmup_steps up to `peak`, then either
    constant or cosine decay from `peak` on the first step after warmup
    towards 0 at `total_steps`.
    """
    if step_index < 1:
        raise ParameterError(f"step_index must be >= 1, got {step_index}")
    if schedule not in LR_SCHEDULES:
        raise ParameterError(f"unknown learning-rate schedule {schedule!r}; expected one of {LR_SCHEDULES}")
    if warmup_steps > 0 and step_index <= warmup_steps:
        return peak * step_index / warmup_steps
    if schedule == "constant":
        return peak
    decay_steps = max(total_steps - warmup_steps, 1)
    progress = min((step_index - warmup_steps - 1) / decay_steps, 1.0)
    return peak * 0.5 * (1.0 + math.cos(math.pi * progress))
