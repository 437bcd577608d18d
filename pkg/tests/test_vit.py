"""ViT config, forward pass, attention capture and attention gradients."""
import math

import numpy as np
import pytest

from gmar.config import LAYERNORM_EPS
from gmar.data.images import Image
from gmar.errors import ConfigError, DimensionError, ParameterError, StateError
from gmar.model import (
    ModelParams,
    ViTConfig,
    backprop_target,
    class_probability,
    forward,
    forward_batch,
    init_params,
    param_shapes,
    patchify,
    predict,
    predict_batch,
)

_erf = np.vectorize(math.erf)


def _layernorm(x, gamma, beta):
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LAYERNORM_EPS) * gamma + beta


def _softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def reference_forward(params, pixels):
    """Straight-line numpy forward, one head at a time."""
    cfg, p = params.config, params.tensors
    ps, grid = cfg.patch_size, cfg.grid_size
    patches = []
    for r in range(grid):
        for c in range(grid):
            patches.append(pixels[r * ps:(r + 1) * ps, c * ps:(c + 1) * ps, :].reshape(-1))
    x = np.array(patches) @ p["patch_embed.weight"] + p["patch_embed.bias"]
    x = np.vstack([p["cls_token"][None], x]) + p["pos_embed"]

    dh = cfg.head_dim
    attentions = []
    for layer in range(cfg.num_layers):
        b = f"blocks.{layer}."
        h = _layernorm(x, p[b + "norm1.gamma"], p[b + "norm1.beta"])
        q = h @ p[b + "attn.q.weight"] + p[b + "attn.q.bias"]
        k = h @ p[b + "attn.k.weight"] + p[b + "attn.k.bias"]
        v = h @ p[b + "attn.v.weight"] + p[b + "attn.v.bias"]
        heads, context = [], []
        for head in range(cfg.num_heads):
            cols = slice(head * dh, (head + 1) * dh)
            a = _softmax(q[:, cols] @ k[:, cols].T / math.sqrt(dh))
            heads.append(a)
            context.append(a @ v[:, cols])
        attentions.append(np.stack(heads))
        x = x + np.hstack(context) @ p[b + "attn.proj.weight"] + p[b + "attn.proj.bias"]
        h = _layernorm(x, p[b + "norm2.gamma"], p[b + "norm2.beta"])
        h = h @ p[b + "mlp.fc1.weight"] + p[b + "mlp.fc1.bias"]
        h = h * 0.5 * (1.0 + _erf(h / math.sqrt(2.0)))
        x = x + h @ p[b + "mlp.fc2.weight"] + p[b + "mlp.fc2.bias"]
    x = _layernorm(x, p["norm.gamma"], p["norm.beta"])
    return x[0] @ p["head.weight"] + p["head.bias"], attentions


@pytest.fixture
def small_image(small_config):
    rng = np.random.default_rng(21)
    return Image(rng.uniform(0, 1, size=(small_config.image_size, small_config.image_size, 3)))


class TestViTConfig:

    def test_toy_profile(self, toy_config):
        assert toy_config.num_tokens == 17
        assert toy_config.grid_size == 4
        assert toy_config.head_dim == 16
        assert toy_config.patch_dim == 192

    @pytest.mark.parametrize("overrides", [
        {"image_size": 30},
        {"embed_dim": 10},
        {"num_layers": 0},
        {"num_heads": -1},
        {"num_classes": 0},
    ])
    def test_invalid_config(self, overrides):
        with pytest.raises(ConfigError):
            ViTConfig(**overrides)

    def test_error_names_the_field(self):
        with pytest.raises(ConfigError, match="patch_size"):
            ViTConfig(image_size=32, patch_size=5)

    def test_as_tuple_order(self, small_config):
        assert small_config.as_tuple() == (16, 8, 16, 2, 2, 32, 4)


class TestParams:

    def test_init_is_deterministic(self, small_config):
        a, b = init_params(small_config, 5), init_params(small_config, 5)
        assert a.checksum() == b.checksum()
        assert init_params(small_config, 6).checksum() != a.checksum()

    def test_init_conventions(self, small_config):
        params = init_params(small_config, 0)
        np.testing.assert_array_equal(params["blocks.0.norm1.gamma"], 1.0)
        np.testing.assert_array_equal(params["blocks.1.attn.q.bias"], 0.0)
        weight = params["patch_embed.weight"]
        assert np.abs(weight).max() <= 0.04 + 1e-12
        assert weight.std() > 0

    def test_arrays_are_read_only(self, small_config):
        params = init_params(small_config, 0)
        with pytest.raises(ValueError):
            params["head.bias"][0] = 1.0

    def test_wrong_shape_rejected(self, small_config):
        tensors = dict(init_params(small_config, 0).tensors)
        tensors["head.bias"] = np.zeros(5)
        with pytest.raises(DimensionError, match="head.bias"):
            ModelParams(small_config, tensors)

    def test_missing_name_rejected(self, small_config):
        tensors = dict(init_params(small_config, 0).tensors)
        del tensors["norm.beta"]
        with pytest.raises(DimensionError):
            ModelParams(small_config, tensors)

    def test_parameter_count(self, small_config):
        params = init_params(small_config, 0)
        assert params.num_parameters() == sum(int(np.prod(s)) for s in param_shapes(small_config).values())


class TestPatchify:

    def test_patch_order_and_layout(self, small_config):
        pixels = np.zeros((16, 16, 3))
        pixels[0, 8, 0] = 0.25
        pixels[8, 0, 2] = 0.75
        pixels[0, 1, 1] = 0.5
        patches = patchify(Image(pixels), small_config).data
        assert patches.shape == (4, 192)
        assert patches[1, 0] == 0.25
        assert patches[2, 2] == 0.75
        # row 0, column 1, channel 1
        assert patches[0, 4] == 0.5

    def test_wrong_image_size(self, small_config):
        with pytest.raises(DimensionError):
            patchify(Image(np.zeros((8, 8, 3))), small_config)


class TestForward:

    def test_token_counts(self, toy_params, toy_image):
        trace = forward(toy_params, toy_image, taped=False)
        assert trace.num_layers == 4
        for attention in trace.attentions:
            assert attention.shape == (4, 17, 17)
        assert trace.tokens.shape == (17, 64)

    def test_full_size_geometry(self):
        config = ViTConfig(image_size=224, patch_size=16, embed_dim=8, num_layers=1,
                           num_heads=2, mlp_dim=8, num_classes=3)
        params = init_params(config, 0)
        image = Image(np.full((224, 224, 3), 0.5))
        trace = forward(params, image, taped=False)
        assert trace.attentions[0].shape == (2, 197, 197)

    def test_attention_rows_are_distributions(self, sharp_params, toy_image):
        trace = forward(sharp_params, toy_image, taped=False)
        for attention in trace.attentions:
            np.testing.assert_allclose(attention.data.sum(axis=-1), 1.0, atol=1e-12)
            assert np.all(attention.data > 0)

    def test_matches_reference(self, small_config, small_image):
        params = init_params(small_config, 4, std=0.3)
        trace = forward(params, small_image, taped=False)
        logits, attentions = reference_forward(params, small_image.pixels)
        np.testing.assert_allclose(trace.logits.data, logits, rtol=0, atol=1e-9)
        for ours, theirs in zip(trace.attentions, attentions):
            np.testing.assert_allclose(ours.data, theirs, rtol=0, atol=1e-12)

    def test_deterministic(self, toy_params, toy_image):
        a = forward(toy_params, toy_image)
        b = forward(toy_params, toy_image)
        assert np.array_equal(a.logits.data, b.logits.data)
        assert np.array_equal(a.attention_array(), b.attention_array())

    def test_batch_matches_single(self, sharp_params, toy_image):
        other = Image(np.flip(toy_image.pixels, axis=1))
        batch = forward_batch(sharp_params, np.stack([toy_image.pixels, other.pixels]), capture=False)
        for row, image in enumerate([toy_image, other]):
            single = forward(sharp_params, image, taped=False)
            np.testing.assert_allclose(batch.logits.data[row], single.logits.data, atol=1e-12)

    def test_rejects_wrong_size(self, toy_params):
        with pytest.raises(DimensionError):
            forward(toy_params, Image(np.zeros((16, 16, 3))))

    def test_predict(self, sharp_params, toy_image):
        label, probs = predict(sharp_params, toy_image)
        assert label == int(np.argmax(probs))
        assert probs.sum() == pytest.approx(1.0)
        classes, batch_probs = predict_batch(sharp_params, toy_image.pixels[None])
        assert classes[0] == label
        np.testing.assert_allclose(batch_probs[0], probs, atol=1e-12)
        assert class_probability(sharp_params, toy_image.pixels, label) == pytest.approx(probs[label], abs=1e-12)


def _offset_logit(params, image, layer, entry, delta, target):
    offset = np.zeros((params.config.num_heads, params.config.num_tokens, params.config.num_tokens))
    offset[entry] = delta
    trace = forward(params, image, taped=False, attention_offsets={layer: offset})
    return trace.logits.data[target]


class TestAttentionGradients:

    def test_shapes(self, toy_params, toy_image):
        trace = backprop_target(forward(toy_params, toy_image))
        assert trace.target_class == trace.predicted_class
        assert len(trace.attention_grads) == 4
        assert trace.gradient_array().shape == (4, 4, 17, 17)
        assert trace.token_grads.shape == (17, 64)

    def test_matches_finite_differences_on_seeded_toy_model(self, toy_params, toy_image):
        config = toy_params.config
        trace = backprop_target(forward(toy_params, toy_image))
        target = trace.target_class
        rng = np.random.default_rng(23)
        eps = 1e-4
        last = config.num_layers - 1
        for layer in range(config.num_layers):
            errors = []
            for n in range(24):
                head = int(rng.integers(config.num_heads))
                row = 0 if (n < 12 or layer == last) else int(rng.integers(1, config.num_tokens))
                col = int(rng.integers(config.num_tokens))
                entry = (head, row, col)
                plus = _offset_logit(toy_params, toy_image, layer, entry, eps, target)
                minus = _offset_logit(toy_params, toy_image, layer, entry, -eps, target)
                numeric = (plus - minus) / (2 * eps)
                analytic = trace.attention_grads[layer].data[entry]
                scale = max(abs(analytic), abs(numeric))
                assert scale > 0.0
                errors.append(abs(analytic - numeric) / scale)
            assert len(errors) >= 20
            assert max(errors) < 1e-4

    def test_matches_finite_differences_on_sharp_attention(self, sharp_params, toy_image):
        config = sharp_params.config
        trace = backprop_target(forward(sharp_params, toy_image))
        target = trace.target_class
        rng = np.random.default_rng(17)
        eps = 1e-5
        for layer in range(config.num_layers):
            analytic, numeric = [], []
            for n in range(20):
                head = int(rng.integers(config.num_heads))
                row = 0 if n < 10 else int(rng.integers(config.num_tokens))
                col = int(rng.integers(config.num_tokens))
                entry = (head, row, col)
                plus = _offset_logit(sharp_params, toy_image, layer, entry, eps, target)
                minus = _offset_logit(sharp_params, toy_image, layer, entry, -eps, target)
                numeric.append((plus - minus) / (2 * eps))
                analytic.append(trace.attention_grads[layer].data[entry])
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8)

    def test_last_layer_non_cls_rows_have_no_effect(self, sharp_params, toy_image):
        trace = backprop_target(forward(sharp_params, toy_image))
        last = trace.attention_grads[-1].data
        np.testing.assert_array_equal(last[:, 1:, :], 0.0)
        base = trace.logits.data[trace.target_class]
        moved = _offset_logit(sharp_params, toy_image, 3, (1, 5, 2), 1e-3, trace.target_class)
        assert abs(moved - base) < 1e-12

    def test_backprop_is_deterministic(self, toy_params, toy_image):
        trace = forward(toy_params, toy_image)
        first = backprop_target(trace, 1).gradient_array()
        second = backprop_target(trace, 1).gradient_array()
        assert np.array_equal(first, second)
        assert trace.target_class == 1

    def test_explicit_class_differs_from_other_class(self, sharp_params, toy_image):
        trace = forward(sharp_params, toy_image)
        g0 = backprop_target(trace, 0).gradient_array()
        g1 = backprop_target(trace, 1).gradient_array()
        assert not np.allclose(g0, g1)

    def test_untaped_trace(self, toy_params, toy_image):
        trace = forward(toy_params, toy_image, taped=False)
        with pytest.raises(StateError):
            backprop_target(trace)
        with pytest.raises(StateError):
            trace.gradient_array()

    @pytest.mark.parametrize("class_index", [-1, 4, 10])
    def test_class_out_of_range(self, toy_params, toy_image, class_index):
        with pytest.raises(ParameterError):
            backprop_target(forward(toy_params, toy_image), class_index)
