"""
Vision Transformer - patch embedding, pre-norm encoder blocks, CLS classifier

Parameters are plain read-only float64 arrays keyed by name; the forward
pass wraps them as Tensors so the same code serves training (parameters
watched on a tape), explanation (input watched, attention probabilities
captured) and fast inference (nothing taped).
"""
import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.stats import truncnorm

from gmar.config import INIT_STD, LAYERNORM_EPS, TOY_VIT_PROFILE
from gmar.errors import ConfigError, DimensionError
from gmar.tensor import Tape, Tensor, ops


@dataclass(frozen=True)
class ViTConfig:
    image_size: int = TOY_VIT_PROFILE["image_size"]
    patch_size: int = TOY_VIT_PROFILE["patch_size"]
    embed_dim: int = TOY_VIT_PROFILE["embed_dim"]
    num_layers: int = TOY_VIT_PROFILE["num_layers"]
    num_heads: int = TOY_VIT_PROFILE["num_heads"]
    mlp_dim: int = TOY_VIT_PROFILE["mlp_dim"]
    num_classes: int = TOY_VIT_PROFILE["num_classes"]

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigError("invalid ViT config: " + "; ".join(problems))

    def violations(self) -> List[str]:
        problems = []
        for name in ("image_size", "patch_size", "embed_dim", "num_layers",
                     "num_heads", "mlp_dim", "num_classes"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                problems.append(f"{name} must be a positive integer (got {value!r})")
        if problems:
            return problems
        if self.image_size % self.patch_size:
            problems.append(
                f"image_size {self.image_size} is not divisible by patch_size {self.patch_size}"
            )
        if self.embed_dim % self.num_heads:
            problems.append(
                f"embed_dim {self.embed_dim} is not divisible by num_heads {self.num_heads}"
            )
        return problems

    @classmethod
    def from_profile(cls, profile: Mapping) -> "ViTConfig":
        return cls(**{k: int(profile[k]) for k in cls.__dataclass_fields__})

    def as_tuple(self) -> Tuple[int, ...]:
        """Field order of the weight-file header."""
        return (self.image_size, self.patch_size, self.embed_dim, self.num_layers,
                self.num_heads, self.mlp_dim, self.num_classes)

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid_size ** 2

    @property
    def num_tokens(self) -> int:
        return self.num_patches + 1

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * 3


def param_shapes(config: ViTConfig) -> Dict[str, Tuple[int, ...]]:
    """Canonical parameter names and shapes, in serialization order."""
    d, m = config.embed_dim, config.mlp_dim
    shapes = {
        "patch_embed.weight": (config.patch_dim, d),
        "patch_embed.bias": (d,),
        "cls_token": (d,),
        "pos_embed": (config.num_tokens, d),
    }
    for layer in range(config.num_layers):
        p = f"blocks.{layer}."
        shapes[p + "norm1.gamma"] = (d,)
        shapes[p + "norm1.beta"] = (d,)
        for proj in ("q", "k", "v", "proj"):
            shapes[p + f"attn.{proj}.weight"] = (d, d)
            shapes[p + f"attn.{proj}.bias"] = (d,)
        shapes[p + "norm2.gamma"] = (d,)
        shapes[p + "norm2.beta"] = (d,)
        shapes[p + "mlp.fc1.weight"] = (d, m)
        shapes[p + "mlp.fc1.bias"] = (m,)
        shapes[p + "mlp.fc2.weight"] = (m, d)
        shapes[p + "mlp.fc2.bias"] = (d,)
    shapes["norm.gamma"] = (d,)
    shapes["norm.beta"] = (d,)
    shapes["head.weight"] = (d, config.num_classes)
    shapes["head.bias"] = (config.num_classes,)
    return shapes


@dataclass(frozen=True)
class ModelParams:
    """Named parameter arrays for one ViTConfig. Arrays are read-only."""

    config: ViTConfig
    tensors: Dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        expected = param_shapes(self.config)
        if list(self.tensors) != list(expected):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            if missing or extra:
                raise DimensionError(f"parameter names differ: missing {missing}, unexpected {extra}")
        frozen = {}
        for name, shape in expected.items():
            array = np.array(self.tensors[name], dtype=np.float64)
            if array.shape != shape:
                raise DimensionError(f"{name}: expected shape {shape}, got {array.shape}")
            array.setflags(write=False)
            frozen[name] = array
        object.__setattr__(self, "tensors", frozen)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> List[str]:
        return list(self.tensors)

    def replace(self, tensors: Mapping[str, np.ndarray]) -> "ModelParams":
        return ModelParams(self.config, {name: tensors[name] for name in self.tensors})

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name, array in self.tensors.items():
            digest.update(name.encode("utf-8"))
            digest.update(array.tobytes())
        return digest.hexdigest()

    def num_parameters(self) -> int:
        return sum(array.size for array in self.tensors.values())


def init_params(config: ViTConfig, seed: Union[int, np.random.Generator] = 0,
                std: float = INIT_STD) -> ModelParams:
    """
    Deterministic initialization.

    Weight matrices, CLS token and position embeddings draw from a normal
    truncated at two standard deviations; biases and layernorm betas are
    zero, layernorm gammas one.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tensors = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".gamma"):
            tensors[name] = np.ones(shape)
        elif name.endswith(".bias") or name.endswith(".beta"):
            tensors[name] = np.zeros(shape)
        else:
            tensors[name] = truncnorm.rvs(-2.0, 2.0, loc=0.0, scale=std, size=shape,
                                          random_state=rng)
    return ModelParams(config, tensors)


def patchify_array(pixels: np.ndarray, patch_size: int) -> np.ndarray:
    """
    (B, H, W, 3) -> (B, P*P, patch_size*patch_size*3).

    Patches run row-major from the top-left; inside a patch values run
    row, then column, then channel.
    """
    b, h, w, c = pixels.shape
    gh, gw = h // patch_size, w // patch_size
    blocks = pixels.reshape(b, gh, patch_size, gw, patch_size, c)
    blocks = blocks.transpose(0, 1, 3, 2, 4, 5)
    return blocks.reshape(b, gh * gw, patch_size * patch_size * c)


def patchify(image, config: ViTConfig) -> Tensor:
    """One image -> Tensor[N-1, patch_size^2 * 3]."""
    pixels = image_pixels(image)
    check_image_size(pixels, config)
    return Tensor(patchify_array(pixels[None], config.patch_size)[0])


def image_pixels(image) -> np.ndarray:
    return np.asarray(getattr(image, "pixels", image), dtype=np.float64)


def check_image_size(pixels: np.ndarray, config: ViTConfig):
    expected = (config.image_size, config.image_size, 3)
    if pixels.shape[-3:] != expected:
        raise DimensionError(
            f"image is {pixels.shape[-3:]} but the model expects {expected}"
        )


@dataclass
class BatchOutput:
    logits: Tensor                      # (B, C)
    attentions: List[Tensor]            # L x (B, H, N, N), post-softmax
    tokens: Optional[Tensor] = None     # (B, N, D), output of the last block


def bind_params(params: ModelParams, tape: Optional[Tape] = None) -> Dict[str, Tensor]:
    """Wrap every parameter as a Tensor, as a tape leaf when a tape is given."""
    if tape is None:
        return {name: Tensor(array) for name, array in params.tensors.items()}
    return {name: tape.watch(array) for name, array in params.tensors.items()}


def _linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    y = ops.matmul(x, weight)
    return ops.add(y, ops.broadcast_to(bias, y.shape))


def _self_attention(x: Tensor, w: Mapping[str, Tensor], prefix: str, config: ViTConfig,
                    offset: Optional[np.ndarray]) -> Tuple[Tensor, Tensor]:
    b, n, d = x.shape
    h, dh = config.num_heads, config.head_dim

    def split_heads(t):
        return ops.permute(ops.reshape(t, (b, n, h, dh)), (0, 2, 1, 3))

    q = split_heads(_linear(x, w[prefix + "q.weight"], w[prefix + "q.bias"]))
    k = split_heads(_linear(x, w[prefix + "k.weight"], w[prefix + "k.bias"]))
    v = split_heads(_linear(x, w[prefix + "v.weight"], w[prefix + "v.bias"]))

    scores = ops.mul_scalar(ops.matmul(q, ops.transpose_last2(k)), 1.0 / math.sqrt(dh))
    attn = ops.softmax_lastdim(scores)
    if offset is not None:
        attn = ops.add(attn, Tensor(np.broadcast_to(offset, attn.shape)))

    context = ops.matmul(attn, v)
    context = ops.reshape(ops.permute(context, (0, 2, 1, 3)), (b, n, d))
    return _linear(context, w[prefix + "proj.weight"], w[prefix + "proj.bias"]), attn


def _encoder_block(x: Tensor, w: Mapping[str, Tensor], layer: int, config: ViTConfig,
                   offset: Optional[np.ndarray]) -> Tuple[Tensor, Tensor]:
    p = f"blocks.{layer}."
    h = ops.layernorm(x, w[p + "norm1.gamma"], w[p + "norm1.beta"], LAYERNORM_EPS)
    attended, attn = _self_attention(h, w, p + "attn.", config, offset)
    x = ops.add(x, attended)

    h = ops.layernorm(x, w[p + "norm2.gamma"], w[p + "norm2.beta"], LAYERNORM_EPS)
    h = ops.gelu(_linear(h, w[p + "mlp.fc1.weight"], w[p + "mlp.fc1.bias"]))
    x = ops.add(x, _linear(h, w[p + "mlp.fc2.weight"], w[p + "mlp.fc2.bias"]))
    return x, attn


def forward_batch(params: ModelParams, pixels: np.ndarray, tape: Optional[Tape] = None,
                  weights: Optional[Dict[str, Tensor]] = None, capture: bool = True,
                  attention_offsets: Optional[Mapping[int, np.ndarray]] = None) -> BatchOutput:
    """
    Batched forward pass over (B, H, W, 3) pixels.

    With a tape and no bound `weights`, the patch input is the tape leaf:
    every activation (attention probabilities included) is taped while the
    parameters stay constants. Training passes `weights` bound to the tape
    instead. `capture=False` skips keeping attentions and tokens.
    `attention_offsets[l]` is added to layer l's attention probabilities.
    """
    config = params.config
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 4:
        raise DimensionError(f"expected (B, H, W, 3) pixels, got {pixels.shape}")
    check_image_size(pixels, config)
    batch = pixels.shape[0]
    d, n = config.embed_dim, config.num_tokens

    w = weights if weights is not None else bind_params(params)
    patches = patchify_array(pixels, config.patch_size)
    x = tape.watch(patches) if (tape is not None and weights is None) else Tensor(patches)

    x = _linear(x, w["patch_embed.weight"], w["patch_embed.bias"])
    cls = ops.broadcast_to(ops.reshape(w["cls_token"], (1, 1, d)), (batch, 1, d))
    x = ops.concat([cls, x], axis=1)
    x = ops.add(x, ops.broadcast_to(w["pos_embed"], (batch, n, d)))

    attentions = []
    offsets = attention_offsets or {}
    for layer in range(config.num_layers):
        x, attn = _encoder_block(x, w, layer, config, offsets.get(layer))
        if capture:
            attentions.append(attn)
    tokens = x if capture else None

    x = ops.layernorm(x, w["norm.gamma"], w["norm.beta"], LAYERNORM_EPS)
    cls_out = ops.reshape(ops.slice(x, 1, 0, 1), (batch, d))
    logits = _linear(cls_out, w["head.weight"], w["head.bias"])
    return BatchOutput(logits=logits, attentions=attentions, tokens=tokens)


def softmax_probabilities(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def predict_batch(params: ModelParams, pixels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Untaped batched inference: (classes (B,), probabilities (B, C))."""
    out = forward_batch(params, pixels, capture=False)
    probs = softmax_probabilities(out.logits.data)
    return np.argmax(out.logits.data, axis=-1), probs
