"""
Attention Rollout and Gradient-Weighted Multi-Head Rollout

Baseline rollout averages heads uniformly and multiplies (A + I) layer by
layer. The weighted variant scores each head by the norm of the target
logit's gradient with respect to that head's attention, combines heads
with the normalized scores and adds an alpha-scaled identity after every
step.

Both right-multiply in layer order: R <- R . M, starting from R = I.
"""
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from gmar.attribution.saliency import SaliencyMap, cls_row_to_grid
from gmar.config import ROLLOUT_DEFAULTS
from gmar.errors import DegenerateGradientWarning, DimensionError, ParameterError, StateError


class NormKind(str, Enum):
    L1 = "l1"
    L2 = "l2"

    @classmethod
    def parse(cls, value) -> "NormKind":
        try:
            return cls(str(getattr(value, "value", value)).lower())
        except ValueError:
            raise ParameterError(f"unknown norm kind {value!r} (l1 or l2)") from None


class WeightScope(str, Enum):
    PER_LAYER = "per_layer"
    GLOBAL = "global"

    @classmethod
    def parse(cls, value) -> "WeightScope":
        text = str(getattr(value, "value", value)).lower().replace("-", "_")
        try:
            return cls(text)
        except ValueError:
            raise ParameterError(f"unknown weight scope {value!r} (per-layer or global)") from None


@dataclass(frozen=True)
class RolloutConfig:
    """
    alpha: residual strength added after each weighted step (>= 0).
    row_normalize: rescale rows to sum 1 after every step.
    baseline_residual: whether baseline rollout adds I to the head mean.
    """

    alpha: float = ROLLOUT_DEFAULTS["alpha"]
    norm_kind: NormKind = NormKind(ROLLOUT_DEFAULTS["norm_kind"])
    weight_scope: WeightScope = WeightScope(ROLLOUT_DEFAULTS["weight_scope"])
    row_normalize: bool = ROLLOUT_DEFAULTS["row_normalize"]
    baseline_residual: bool = ROLLOUT_DEFAULTS["baseline_residual"]

    def __post_init__(self):
        alpha = float(self.alpha)
        if not np.isfinite(alpha) or alpha < 0:
            raise ParameterError(f"alpha must be a finite value >= 0, got {self.alpha}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "norm_kind", NormKind.parse(self.norm_kind))
        object.__setattr__(self, "weight_scope", WeightScope.parse(self.weight_scope))

    @classmethod
    def from_profile(cls, profile: Mapping = ROLLOUT_DEFAULTS, **overrides) -> "RolloutConfig":
        merged = {**profile, **overrides}
        return cls(**{k: merged[k] for k in cls.__dataclass_fields__ if k in merged})

    def with_norm(self, norm_kind) -> "RolloutConfig":
        return replace(self, norm_kind=NormKind.parse(norm_kind))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "norm_kind": self.norm_kind.value,
            "weight_scope": self.weight_scope.value,
            "row_normalize": self.row_normalize,
            "baseline_residual": self.baseline_residual,
        }


@dataclass(frozen=True)
class HeadWeights:
    """
    Normalized head importances.

    per_layer scope: `weights` is [L, H], one distribution per layer.
    global scope: `weights` is [H], shared by every layer.
    `scores` holds the raw gradient norms in the same layout and
    `degenerate` flags scopes whose gradients were all zero.
    """

    weights: np.ndarray
    scores: np.ndarray
    norm_kind: NormKind
    weight_scope: WeightScope
    degenerate: np.ndarray = field(default=None)

    def for_layer(self, layer: int) -> np.ndarray:
        if self.weight_scope is WeightScope.GLOBAL:
            return self.weights
        return self.weights[layer]

    @property
    def num_heads(self) -> int:
        return self.weights.shape[-1]

    def as_lists(self) -> List[List[float]]:
        """Per-layer rows (a single row in global scope)."""
        return np.atleast_2d(self.weights).tolist()


def _gradient_norms(grads: np.ndarray, norm_kind: NormKind) -> np.ndarray:
    """Per-head norm over every remaining axis of a [H, ...] array."""
    flat = grads.reshape(grads.shape[0], -1)
    if norm_kind is NormKind.L1:
        return np.abs(flat).sum(axis=1)
    return np.sqrt(np.square(flat).sum(axis=1))


def _normalize_scores(scores: np.ndarray) -> Tuple[np.ndarray, bool]:
    h = scores.shape[0]
    total = scores.sum()
    if total == 0.0:
        return np.full(h, 1.0 / h), True
    if np.ptp(scores) == 0.0:
        return np.full(h, 1.0 / h), False
    return scores / total, False


def _as_stack(tensors: Sequence, what: str) -> np.ndarray:
    arrays = [np.asarray(getattr(t, "data", t), dtype=np.float64) for t in tensors]
    if not arrays:
        raise StateError(f"no {what} to combine")
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1 or arrays[0].ndim != 3:
        raise DimensionError(f"{what} must share one [H, N, N] shape, got {sorted(shapes)}")
    return np.stack(arrays)


def head_weights(attention_grads: Sequence, norm_kind=NormKind.L2,
                 weight_scope=WeightScope.PER_LAYER) -> HeadWeights:
    """
    Gradient-norm head importances.

    L1 scores a head by the sum of absolute gradient entries, L2 by the
    root of the sum of squares; per_layer normalizes within each layer,
    global pools every layer's entries per head first. Scopes whose
    gradients are all zero fall back to uniform weights with a
    DegenerateGradientWarning; equal scores give exactly 1/H.
    """
    norm_kind = NormKind.parse(norm_kind)
    weight_scope = WeightScope.parse(weight_scope)
    grads = _as_stack(attention_grads, "attention gradients")  # [L, H, N, N]

    if weight_scope is WeightScope.GLOBAL:
        pooled = np.moveaxis(grads, 1, 0)  # [H, L, N, N]
        scores = _gradient_norms(pooled, norm_kind)
        weights, flag = _normalize_scores(scores)
        degenerate = np.array(flag)
    else:
        scores = np.stack([_gradient_norms(layer, norm_kind) for layer in grads])
        rows = [_normalize_scores(row) for row in scores]
        weights = np.stack([w for w, _ in rows])
        degenerate = np.array([flag for _, flag in rows])

    if np.any(degenerate):
        warnings.warn(
            "all-zero attention gradients in at least one scope; using uniform head weights",
            DegenerateGradientWarning,
            stacklevel=2,
        )
    return HeadWeights(weights, scores, norm_kind, weight_scope, degenerate)


def _identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.float64)


def _row_normalize(matrix: np.ndarray) -> np.ndarray:
    sums = matrix.sum(axis=-1, keepdims=True)
    return np.divide(matrix, sums, out=matrix.copy(), where=sums != 0)


def _attentions_of(trace_or_attentions) -> Sequence:
    return getattr(trace_or_attentions, "attentions", trace_or_attentions)


def attention_rollout(trace, config: Optional[RolloutConfig] = None,
                      vit_config=None) -> Tuple[np.ndarray, SaliencyMap]:
    """Uniform head-mean rollout; ignores alpha and head weights."""
    config = config or RolloutConfig()
    attentions = _as_stack(_attentions_of(trace), "attention tensors")
    n = attentions.shape[-1]
    identity = _identity(n)

    rollout = identity
    for layer in attentions:
        factor = layer.mean(axis=0)
        if config.baseline_residual:
            factor = factor + identity
        if config.row_normalize:
            factor = _row_normalize(factor)
        rollout = rollout @ factor
    return rollout, cls_row_to_grid(rollout, vit_config, "rollout")


def weighted_heads(attention: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Contract the head axis: sum_h w_h A[h]."""
    return np.tensordot(weights, attention, axes=(0, 0))


def gmar_rollout(trace, config: Optional[RolloutConfig] = None,
                 weights: Optional[HeadWeights] = None,
                 vit_config=None) -> Tuple[np.ndarray, SaliencyMap]:
    """
    Gradient-weighted rollout: R <- R . (sum_h w_h A[h]) + alpha I.

    Head weights are computed from `trace.attention_grads` unless given.
    """
    config = config or RolloutConfig()
    attentions = _as_stack(_attentions_of(trace), "attention tensors")
    if weights is None:
        grads = getattr(trace, "attention_grads", None)
        if grads is None:
            raise StateError("trace has no attention gradients; call backprop_target first")
        weights = head_weights(grads, config.norm_kind, config.weight_scope)
    if weights.num_heads != attentions.shape[1]:
        raise DimensionError(
            f"{weights.num_heads} head weights for {attentions.shape[1]} attention heads"
        )

    n = attentions.shape[-1]
    identity = _identity(n)
    rollout = identity
    for index, layer in enumerate(attentions):
        rollout = rollout @ weighted_heads(layer, weights.for_layer(index)) + config.alpha * identity
        if config.row_normalize:
            rollout = _row_normalize(rollout)
    label = f"gmar_{weights.norm_kind.value}"
    return rollout, cls_row_to_grid(rollout, vit_config, label)


def head_weight_frame(weights: HeadWeights) -> pd.DataFrame:
    """Long-form table of weights: one row per (layer, head)."""
    table = np.atleast_2d(weights.weights)
    scores = np.atleast_2d(weights.scores)
    layers = ["all"] if weights.weight_scope is WeightScope.GLOBAL else list(range(table.shape[0]))
    rows = []
    for row, layer in enumerate(layers):
        for head in range(table.shape[1]):
            rows.append({
                "layer": layer,
                "head": head,
                "score": float(scores[row, head]),
                "weight": float(table[row, head]),
            })
    return pd.DataFrame(rows, columns=["layer", "head", "score", "weight"])
