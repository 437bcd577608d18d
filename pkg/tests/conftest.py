"""
Shared fixtures: toy configs, seeded parameters and images, trace factories
"""
import numpy as np
import pytest

from gmar.config import TOY_TRAIN_PROFILE, TOY_VIT_PROFILE
from gmar.data.images import Image
from gmar.data.synthetic import SyntheticDatasetSpec, generate_synthetic, mirror_label_map
from gmar.model import ForwardTrace, ViTConfig, init_params
from gmar.tensor import Tensor
from gmar.training import TrainConfig, train


@pytest.fixture(scope="session")
def toy_config():
    return ViTConfig.from_profile(TOY_VIT_PROFILE)


@pytest.fixture(scope="session")
def small_config():
    """Two layers, two heads, 2 x 2 patch grid: N = 5."""
    return ViTConfig(image_size=16, patch_size=8, embed_dim=16, num_layers=2,
                     num_heads=2, mlp_dim=32, num_classes=4)


@pytest.fixture(scope="session")
def toy_params(toy_config):
    return init_params(toy_config, 42)


@pytest.fixture(scope="session")
def sharp_params(toy_config):
    """Larger init so attention is far from uniform."""
    return init_params(toy_config, 7, std=0.3)


@pytest.fixture
def toy_image(toy_config):
    rng = np.random.default_rng(3)
    return Image(rng.uniform(0.0, 1.0, size=(toy_config.image_size, toy_config.image_size, 3)))


def random_attention(rng, heads, tokens):
    logits = rng.normal(0.0, 1.5, size=(heads, tokens, tokens))
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def make_trace(rng, layers, heads, tokens, num_classes=4, grads=None):
    """ForwardTrace built from random row-stochastic attentions and normal gradients."""
    attentions = [Tensor(random_attention(rng, heads, tokens)) for _ in range(layers)]
    if grads is None:
        grads = [Tensor(rng.normal(size=(heads, tokens, tokens))) for _ in range(layers)]
    else:
        grads = [Tensor(g) for g in grads]
    return ForwardTrace(
        logits=Tensor(np.zeros(num_classes)),
        attentions=attentions,
        predicted_class=0,
        attention_grads=grads,
    )


@pytest.fixture
def trace_factory():
    return make_trace


@pytest.fixture(scope="session")
def trained_toy(toy_config):
    """Seed-42 toy model trained with the toy profile on 4 x 200 synthetic images."""
    dataset = generate_synthetic(SyntheticDatasetSpec(seed=42))
    config = TrainConfig.from_profile(TOY_TRAIN_PROFILE, seed=42)
    return train(toy_config, config, dataset, label_flip=mirror_label_map(4)), dataset
