import numpy as np
import pytest

from gmar.attribution import SaliencyMap, random_saliency
from gmar.data import Image, RenderMode, colormap_diverging, colormap_sequential, render_heatmap
from gmar.errors import DimensionError, ParameterError


@pytest.fixture
def base():
    return Image(np.full((32, 32, 3), 0.2))


def test_sequential_endpoints():
    np.testing.assert_array_equal(colormap_sequential([0.0, 1.0]), [[0, 0, 1], [1, 0, 0]])
    np.testing.assert_array_equal(colormap_sequential([0.5]), [[0.5, 0, 0.5]])


def test_diverging_endpoints():
    np.testing.assert_array_equal(
        colormap_diverging([-1.0, 0.0, 1.0]),
        [[0, 0, 1], [1, 1, 1], [1, 0, 0]],
    )


def test_colormaps_clip():
    np.testing.assert_array_equal(colormap_sequential([2.0]), colormap_sequential([1.0]))
    np.testing.assert_array_equal(colormap_diverging([-3.0]), colormap_diverging([-1.0]))


def test_raw_of_constant_map(base):
    rendered = render_heatmap(SaliencyMap(np.ones((4, 4))), base, RenderMode.RAW)
    assert rendered.pixels.shape == (32, 32, 3)
    np.testing.assert_array_equal(rendered.pixels[..., 0], 1.0)
    np.testing.assert_array_equal(rendered.pixels[..., 2], 0.0)


def test_overlay_blends_half_and_half(base):
    rendered = render_heatmap(SaliencyMap(np.zeros((4, 4))), base, "overlay")
    np.testing.assert_allclose(rendered.pixels[0, 0], [0.1, 0.1, 0.6])


def test_diverging_of_zero_difference_is_white(base):
    rendered = render_heatmap(np.zeros((4, 4)), base, RenderMode.DIVERGING)
    np.testing.assert_array_equal(rendered.pixels, 1.0)


def test_output_stays_in_unit_range(base):
    rendered = render_heatmap(random_saliency(4, seed=0), base)
    assert rendered.pixels.min() >= 0.0 and rendered.pixels.max() <= 1.0


def test_unknown_mode(base):
    with pytest.raises(ParameterError):
        render_heatmap(np.zeros((4, 4)), base, "sepia")


def test_grid_must_be_2d(base):
    with pytest.raises(DimensionError):
        render_heatmap(np.zeros(16), base)
