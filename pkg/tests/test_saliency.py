"""Saliency maps, Grad-CAM and the end-to-end explain entry point."""
import numpy as np
import pytest

from gmar.attribution import (
    Method,
    RolloutConfig,
    SaliencyMap,
    cls_row_to_grid,
    difference_map,
    explain,
    gradcam_vit,
    normalize,
    random_saliency,
)
from gmar.attribution.saliency import as_saliency, grid_side
from gmar.config import CONSTANT_MAP_VALUE
from gmar.errors import DimensionError, ParameterError, StateError
from gmar.model import backprop_target, forward


class TestNormalize:

    def test_spans_unit_interval(self):
        raw = np.random.default_rng(0).normal(size=(4, 4)) * 7 + 3
        saliency = normalize(raw)
        assert saliency.grid.min() == 0.0
        assert saliency.grid.max() == 1.0
        assert not saliency.constant

    def test_constant_grid(self):
        saliency = normalize(np.full((3, 3), -2.5), "x")
        np.testing.assert_array_equal(saliency.grid, CONSTANT_MAP_VALUE)
        assert saliency.constant
        assert saliency.source_method == "x"

    def test_grid_must_be_square(self):
        with pytest.raises(DimensionError):
            SaliencyMap(np.zeros((2, 3)))

    def test_read_only(self):
        saliency = normalize(np.arange(4.0).reshape(2, 2))
        with pytest.raises(ValueError):
            saliency.grid[0, 0] = 1.0

    def test_as_saliency(self):
        saliency = normalize(np.arange(4.0).reshape(2, 2), "a")
        assert as_saliency(saliency) is saliency
        assert as_saliency(np.arange(4.0).reshape(2, 2), "b").source_method == "b"


class TestClsRowToGrid:

    def test_identity_gives_constant_map(self):
        saliency = cls_row_to_grid(np.eye(17))
        assert saliency.constant
        np.testing.assert_array_equal(saliency.grid, 0.5)

    def test_one_hot_row(self):
        rollout = np.eye(17)
        rollout[0] = 0.0
        rollout[0, 1 + 6] = 1.0
        grid = cls_row_to_grid(rollout).grid
        expected = np.zeros((4, 4))
        expected[1, 2] = 1.0
        np.testing.assert_array_equal(grid, expected)

    @pytest.mark.parametrize("n", [1, 3, 16, 18])
    def test_token_count_must_be_square_plus_one(self, n):
        with pytest.raises(DimensionError):
            cls_row_to_grid(np.eye(n))

    def test_grid_side(self):
        assert grid_side(197) == 14
        assert grid_side(2) == 1

    def test_non_square_matrix(self):
        with pytest.raises(DimensionError):
            cls_row_to_grid(np.ones((5, 4)))


class TestRandomSaliency:

    def test_deterministic_per_seed(self, toy_config):
        a = random_saliency(toy_config, seed=4)
        b = random_saliency(toy_config, seed=4)
        c = random_saliency(toy_config, seed=5)
        np.testing.assert_array_equal(a.grid, b.grid)
        assert not np.array_equal(a.grid, c.grid)
        assert a.grid.shape == (4, 4)
        assert a.source_method == "random"

    def test_values_span_unit_interval(self):
        saliency = random_saliency(100, seed=0)
        assert saliency.grid.min() == 0.0
        assert saliency.grid.max() == 1.0
        assert abs(saliency.grid.mean() - 0.5) < 0.02

    def test_grid_size_must_be_positive(self):
        with pytest.raises(DimensionError):
            random_saliency(0)


class TestDifferenceMap:

    def test_self_difference_is_zero(self):
        a = random_saliency(4, seed=1)
        np.testing.assert_array_equal(difference_map(a, a), 0.0)

    def test_antisymmetry_and_range(self):
        a, b = random_saliency(4, seed=1), random_saliency(4, seed=2)
        np.testing.assert_array_equal(difference_map(a, b), -difference_map(b, a))
        diff = difference_map(a, b)
        assert diff.min() >= -1.0 and diff.max() <= 1.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            difference_map(random_saliency(4), random_saliency(3))


class TestUpsample:

    def test_constant_map_stays_constant(self):
        saliency = SaliencyMap(np.ones((4, 4)))
        np.testing.assert_array_equal(saliency.upsample(32), 1.0)

    def test_shape(self):
        assert random_saliency(4).upsample((32, 16)).shape == (32, 16)


class TestGradcam:

    def test_negative_channel_sums_give_constant_map(self):
        acts = np.ones((17, 8))
        grads = -np.ones((17, 8))
        saliency = gradcam_vit(token_grads=grads, token_activations=acts)
        assert saliency.constant
        np.testing.assert_array_equal(saliency.grid, 0.5)

    def test_dominant_channel_peaks_at_its_patch(self):
        acts = np.zeros((16, 8))
        acts[9, 3] = 2.0
        grads = np.zeros((16, 8))
        grads[:, 3] = 1.0
        grid = gradcam_vit(token_grads=grads, token_activations=acts).grid
        assert np.unravel_index(np.argmax(grid), grid.shape) == (2, 1)
        assert grid.max() == 1.0

    def test_cls_row_is_dropped(self):
        acts = np.zeros((17, 4))
        acts[0, 0] = 100.0
        acts[5, 0] = 1.0
        grads = np.ones((17, 4))
        grid = gradcam_vit(token_grads=grads, token_activations=acts).grid
        expected = np.zeros((4, 4))
        expected[1, 0] = 1.0
        np.testing.assert_array_equal(grid, expected)

    def test_on_model_trace(self, sharp_params, toy_image):
        trace = backprop_target(forward(sharp_params, toy_image))
        saliency = gradcam_vit(trace)
        assert saliency.grid.shape == (4, 4)
        assert saliency.source_method == "gradcam"

    def test_missing_gradients(self, toy_params, toy_image):
        with pytest.raises(StateError):
            gradcam_vit(forward(toy_params, toy_image))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            gradcam_vit(token_grads=np.ones((17, 4)), token_activations=np.ones((17, 5)))


class TestMethod:

    @pytest.mark.parametrize("text,method", [
        ("rollout", Method.ROLLOUT),
        ("gmar-l1", Method.GMAR_L1),
        ("GMAR_L2", Method.GMAR_L2),
        ("gradcam", Method.GRADCAM),
        ("random", Method.RANDOM),
    ])
    def test_parse(self, text, method):
        assert Method.parse(text) is method

    def test_unknown(self):
        with pytest.raises(ParameterError, match="gmar-l1"):
            Method.parse("lrp")

    def test_properties(self):
        assert Method.GMAR_L1.cli_name == "gmar-l1"
        assert Method.GRADCAM.needs_gradients
        assert not Method.ROLLOUT.needs_gradients
        assert Method.ROLLOUT.norm_kind is None


class TestExplain:

    @pytest.mark.parametrize("method", list(Method))
    def test_every_method(self, sharp_params, toy_image, method):
        explanation = explain(sharp_params, toy_image, method)
        assert explanation.saliency.grid.shape == (4, 4)
        assert 0.0 <= explanation.saliency.grid.min() <= explanation.saliency.grid.max() <= 1.0
        document = explanation.to_dict()
        assert document["method"] == method.cli_name
        assert len(document["probabilities"]) == 4
        assert ("head_weights" in document) == (method.norm_kind is not None)
        assert ("head_weight_table" in document) == (method.norm_kind is not None)

    def test_head_weight_table_matches_weights(self, sharp_params, toy_image):
        explanation = explain(sharp_params, toy_image, "gmar-l2")
        table = explanation.to_dict()["head_weight_table"]
        assert [(row["layer"], row["head"]) for row in table] == [(layer, head) for layer in range(4) for head in range(4)]
        weights = explanation.head_weights.weights
        scores = explanation.head_weights.scores
        for row in table:
            assert row["weight"] == weights[row["layer"], row["head"]]
            assert row["score"] == scores[row["layer"], row["head"]]

    def test_norm_selects_head_weights(self, sharp_params, toy_image):
        l1 = explain(sharp_params, toy_image, "gmar-l1")
        l2 = explain(sharp_params, toy_image, "gmar-l2", RolloutConfig(norm_kind="l1"))
        assert l1.head_weights.norm_kind.value == "l1"
        assert l2.head_weights.norm_kind.value == "l2"
        assert l2.saliency.source_method == "gmar_l2"

    def test_deterministic(self, sharp_params, toy_image):
        a = explain(sharp_params, toy_image, "gmar-l2")
        b = explain(sharp_params, toy_image, "gmar-l2")
        np.testing.assert_array_equal(a.saliency.grid, b.saliency.grid)

    def test_random_uses_seed(self, sharp_params, toy_image):
        a = explain(sharp_params, toy_image, "random", seed=1)
        b = explain(sharp_params, toy_image, "random", seed=2)
        assert not np.array_equal(a.saliency.grid, b.saliency.grid)

    def test_target_class(self, sharp_params, toy_image):
        explanation = explain(sharp_params, toy_image, "gmar-l1", target_class=3)
        assert explanation.trace.target_class == 3

    def test_gmar_differs_from_rollout(self, sharp_params, toy_image):
        gmar = explain(sharp_params, toy_image, "gmar-l2")
        rollout = explain(sharp_params, toy_image, "rollout")
        assert np.abs(difference_map(gmar.saliency, rollout.saliency)).max() > 0
