"""
Explain - run one attribution method on one image end to end
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from gmar.attribution.gradcam import gradcam_vit
from gmar.attribution.rollout import (
    HeadWeights,
    NormKind,
    RolloutConfig,
    attention_rollout,
    gmar_rollout,
    head_weight_frame,
    head_weights,
)
from gmar.attribution.saliency import SaliencyMap, random_saliency
from gmar.errors import ParameterError
from gmar.model.trace import ForwardTrace, backprop_target, forward
from gmar.model.vit import ModelParams


class Method(str, Enum):
    ROLLOUT = "rollout"
    GMAR_L1 = "gmar_l1"
    GMAR_L2 = "gmar_l2"
    GRADCAM = "gradcam"
    RANDOM = "random"

    @classmethod
    def parse(cls, value) -> "Method":
        """Accepts enum members, 'gmar_l1' and the CLI spelling 'gmar-l1'."""
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("-", "_")
        try:
            return cls(text)
        except ValueError:
            names = ", ".join(m.cli_name for m in cls)
            raise ParameterError(f"unknown method {value!r} (one of {names})") from None

    @property
    def cli_name(self) -> str:
        return self.value.replace("_", "-")

    @property
    def needs_gradients(self) -> bool:
        return self in (Method.GMAR_L1, Method.GMAR_L2, Method.GRADCAM)

    @property
    def norm_kind(self) -> Optional[NormKind]:
        return {Method.GMAR_L1: NormKind.L1, Method.GMAR_L2: NormKind.L2}.get(self)


@dataclass
class Explanation:
    method: Method
    saliency: SaliencyMap
    trace: ForwardTrace
    head_weights: Optional[HeadWeights] = None
    rollout: Optional[np.ndarray] = None

    @property
    def predicted_class(self) -> int:
        return self.trace.predicted_class

    @property
    def probabilities(self) -> np.ndarray:
        return self.trace.probabilities

    def to_dict(self) -> dict:
        out = {
            "method": self.method.cli_name,
            "predicted_class": self.predicted_class,
            "probabilities": self.probabilities.tolist(),
            "constant_map": self.saliency.constant,
            "saliency": self.saliency.grid.tolist(),
        }
        if self.head_weights is not None:
            out["weight_scope"] = self.head_weights.weight_scope.value
            out["norm_kind"] = self.head_weights.norm_kind.value
            out["head_weights"] = self.head_weights.as_lists()
            out["head_weight_table"] = head_weight_frame(self.head_weights).to_dict(orient="records")
            out["degenerate_scopes"] = np.atleast_1d(self.head_weights.degenerate).tolist()
        return out


def explain(params: ModelParams, image, method, rollout_config: Optional[RolloutConfig] = None,
            seed: int = 0, target_class: Optional[int] = None) -> Explanation:
    """
    Saliency for one image.

    Gradient methods backprop the predicted class unless `target_class`
    is given. `seed` only matters for the random baseline.
    """
    method = Method.parse(method)
    rollout_config = rollout_config or RolloutConfig()
    trace = forward(params, image, taped=method.needs_gradients)
    if method.needs_gradients:
        backprop_target(trace, target_class)

    vit_config = params.config
    if method is Method.ROLLOUT:
        matrix, saliency = attention_rollout(trace, rollout_config, vit_config)
        return Explanation(method, saliency, trace, rollout=matrix)
    if method is Method.RANDOM:
        return Explanation(method, random_saliency(vit_config, seed), trace)
    if method is Method.GRADCAM:
        return Explanation(method, gradcam_vit(trace), trace)

    config = rollout_config.with_norm(method.norm_kind)
    weights = head_weights(trace.attention_grads, config.norm_kind, config.weight_scope)
    matrix, saliency = gmar_rollout(trace, config, weights, vit_config)
    return Explanation(method, saliency, trace, head_weights=weights, rollout=matrix)
