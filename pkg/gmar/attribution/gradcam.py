"""
Grad-CAM adapted to ViT patch tokens

The final encoder block's patch tokens play the role of a CNN feature
map: channel weights are the token-averaged gradients, the map is the
ReLU of the weighted channel sum per patch.
"""
import math
from typing import Optional

import numpy as np

from gmar.attribution.saliency import SaliencyMap, grid_side, normalize
from gmar.errors import DimensionError, StateError


def gradcam_vit(trace=None, token_grads: Optional[np.ndarray] = None,
                token_activations: Optional[np.ndarray] = None) -> SaliencyMap:
    """
    Class activation map over patches.

    Gradients and activations default to the trace's final-block tokens
    (CLS included, [N, D]); explicitly passed arrays may be [N, D] with
    CLS or [N-1, D] without it.
    """
    if token_grads is None:
        token_grads = getattr(trace, "token_grads", None)
    if token_activations is None:
        token_activations = getattr(trace, "tokens", None)
    if token_grads is None:
        raise StateError("no token gradients; call backprop_target first")
    if token_activations is None:
        raise StateError("no token activations captured")

    grads = np.asarray(getattr(token_grads, "data", token_grads), dtype=np.float64)
    acts = np.asarray(getattr(token_activations, "data", token_activations), dtype=np.float64)
    if grads.shape != acts.shape or grads.ndim != 2:
        raise DimensionError(f"token gradients {grads.shape} vs activations {acts.shape}")

    if trace is not None and grads.shape[0] == trace.num_tokens:
        grads, acts = grads[1:], acts[1:]
    elif _is_square(grads.shape[0] - 1) and not _is_square(grads.shape[0]):
        grads, acts = grads[1:], acts[1:]
    side = grid_side(grads.shape[0] + 1)

    channel_weights = grads.mean(axis=0)
    cam = np.maximum(acts @ channel_weights, 0.0)
    return normalize(cam.reshape(side, side), "gradcam")


def _is_square(n: int) -> bool:
    if n < 1:
        return False
    root = math.isqrt(n)
    return root * root == n
