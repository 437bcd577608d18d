from gmar.attribution.explain import Explanation, Method, explain
from gmar.attribution.gradcam import gradcam_vit
from gmar.attribution.rollout import (
    HeadWeights,
    NormKind,
    RolloutConfig,
    WeightScope,
    attention_rollout,
    gmar_rollout,
    head_weight_frame,
    head_weights,
)
from gmar.attribution.saliency import (
    SaliencyMap,
    cls_row_to_grid,
    difference_map,
    normalize,
    random_saliency,
)

__all__ = [
    "Explanation",
    "HeadWeights",
    "Method",
    "NormKind",
    "RolloutConfig",
    "SaliencyMap",
    "WeightScope",
    "attention_rollout",
    "cls_row_to_grid",
    "difference_map",
    "explain",
    "gmar_rollout",
    "gradcam_vit",
    "head_weight_frame",
    "head_weights",
    "normalize",
    "random_saliency",
]
