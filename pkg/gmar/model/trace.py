"""
Forward traces - one inference with captured attention and its gradients
"""
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Tuple

import numpy as np

from gmar.errors import DimensionError, ParameterError, StateError
from gmar.model.vit import ModelParams, check_image_size, image_pixels, forward_batch, \
    softmax_probabilities
from gmar.tensor import Tape, Tensor, ops


@dataclass
class ForwardTrace:
    """
    Logits plus per-layer attention probabilities (each [H, N, N]).

    `attention_grads` and `token_grads` stay None until `backprop_target`
    runs. `tokens` holds the final encoder block's output, CLS included,
    shaped [N, D].
    """

    logits: Tensor
    attentions: List[Tensor]
    predicted_class: int
    tokens: Optional[Tensor] = None
    attention_grads: Optional[List[Tensor]] = None
    token_grads: Optional[Tensor] = None
    target_class: Optional[int] = None
    tape: Optional[Tape] = field(default=None, repr=False)
    _logits_node: Optional[Tensor] = field(default=None, repr=False)
    _attention_nodes: List[Tensor] = field(default_factory=list, repr=False)
    _token_node: Optional[Tensor] = field(default=None, repr=False)

    @property
    def num_layers(self) -> int:
        return len(self.attentions)

    @property
    def num_heads(self) -> int:
        return self.attentions[0].shape[0]

    @property
    def num_tokens(self) -> int:
        return self.attentions[0].shape[-1]

    @property
    def probabilities(self) -> np.ndarray:
        return softmax_probabilities(self.logits.data)

    def attention_array(self) -> np.ndarray:
        """Stacked attentions, [L, H, N, N]."""
        return np.stack([a.data for a in self.attentions])

    def gradient_array(self) -> np.ndarray:
        if self.attention_grads is None:
            raise StateError("no attention gradients yet; call backprop_target first")
        return np.stack([g.data for g in self.attention_grads])


def argmax_lowest(values: np.ndarray) -> int:
    """Argmax with ties resolved to the lowest index."""
    return int(np.argmax(values))


def forward(params: ModelParams, image, taped: bool = True,
            attention_offsets: Optional[Mapping[int, np.ndarray]] = None) -> ForwardTrace:
    """
    Run one image and capture every layer's post-softmax attention.

    With `taped` the image patches are a tape leaf, so `backprop_target`
    can differentiate the logits with respect to each attention tensor.
    `attention_offsets` maps layer -> [H, N, N] added to that layer's
    probabilities (finite-difference checks).
    """
    pixels = image_pixels(image)
    if pixels.ndim != 3:
        raise DimensionError(f"expected one (H, W, 3) image, got {pixels.shape}")
    check_image_size(pixels, params.config)

    offsets = None
    if attention_offsets:
        offsets = {layer: np.asarray(off, dtype=np.float64)[None]
                   for layer, off in attention_offsets.items()}

    tape = Tape() if taped else None
    out = forward_batch(params, pixels[None], tape=tape, capture=True,
                        attention_offsets=offsets)
    logits = Tensor(out.logits.data[0])
    return ForwardTrace(
        logits=logits,
        attentions=[Tensor(a.data[0]) for a in out.attentions],
        predicted_class=argmax_lowest(logits.data),
        tokens=Tensor(out.tokens.data[0]),
        tape=tape,
        _logits_node=out.logits,
        _attention_nodes=list(out.attentions),
        _token_node=out.tokens,
    )


def target_logit(trace: ForwardTrace, class_index: int) -> Tensor:
    """The taped scalar logits[class_index]."""
    return ops.sum_axis(ops.gather_lastdim(trace._logits_node, [class_index]))


def backprop_target(trace: ForwardTrace, class_index: Optional[int] = None) -> ForwardTrace:
    """
    Fill `attention_grads[l][h] = d logits[class_index] / d attentions[l][h]`.

    Defaults to the predicted class. Token gradients for Grad-CAM are
    filled from the same sweep. Calling twice with the same class gives
    identical gradients.
    """
    if trace.tape is None or trace._logits_node is None:
        raise StateError("trace has no tape; rerun forward with taped=True")
    if class_index is None:
        class_index = trace.predicted_class
    num_classes = trace.logits.shape[0]
    if not 0 <= int(class_index) < num_classes:
        raise ParameterError(f"class index {class_index} outside [0, {num_classes})")
    class_index = int(class_index)

    grads = trace.tape.backward(target_logit(trace, class_index))
    trace.attention_grads = [Tensor(grads[node][0]) for node in trace._attention_nodes]
    if trace._token_node is not None:
        trace.token_grads = Tensor(grads[trace._token_node][0])
    trace.target_class = class_index
    return trace


def predict(params: ModelParams, image) -> Tuple[int, np.ndarray]:
    """(class, probabilities) for one image; ties go to the lowest class."""
    trace = forward(params, image, taped=False)
    return trace.predicted_class, trace.probabilities


def class_probability(params: ModelParams, pixels: np.ndarray, class_index: int) -> float:
    """Softmax probability of one class for one (H, W, 3) array, untaped."""
    out = forward_batch(params, np.asarray(pixels, dtype=np.float64)[None], capture=False)
    return float(softmax_probabilities(out.logits.data[0])[class_index])
