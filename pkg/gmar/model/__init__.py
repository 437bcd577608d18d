from gmar.model.trace import ForwardTrace, backprop_target, class_probability, forward, predict
from gmar.model.vit import (
    BatchOutput,
    ModelParams,
    ViTConfig,
    bind_params,
    forward_batch,
    init_params,
    param_shapes,
    patchify,
    predict_batch,
)

__all__ = [
    "BatchOutput",
    "ForwardTrace",
    "ModelParams",
    "ViTConfig",
    "backprop_target",
    "bind_params",
    "class_probability",
    "forward",
    "forward_batch",
    "init_params",
    "param_shapes",
    "patchify",
    "predict",
    "predict_batch",
]
