"""
Heatmap rendering - overlay, raw and diverging views of a saliency grid

Colormaps are fixed linear ramps so their endpoints are exact:
sequential 0 -> blue (0, 0, 1), 1 -> red (1, 0, 0);
diverging -1 -> blue, 0 -> white, +1 -> red.
"""
from enum import Enum
from typing import Union

import numpy as np

from gmar.data.images import Image, resize_grid
from gmar.errors import DimensionError, ParameterError


class RenderMode(str, Enum):
    OVERLAY = "overlay"
    RAW = "raw"
    DIVERGING = "diverging"


def colormap_sequential(values: np.ndarray) -> np.ndarray:
    """[0, 1] -> RGB along blue -> red."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.stack([v, np.zeros_like(v), 1.0 - v], axis=-1)


def colormap_diverging(values: np.ndarray) -> np.ndarray:
    """[-1, 1] -> RGB along blue -> white -> red."""
    v = np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)
    neg = np.minimum(v, 0.0)
    pos = np.maximum(v, 0.0)
    return np.stack([1.0 + neg, 1.0 - pos + neg, 1.0 - pos], axis=-1)


def render_heatmap(saliency, base: Image, mode: Union[str, RenderMode] = RenderMode.OVERLAY) -> Image:
    """
    Upsample the grid bilinearly to the base image and colorize it.

    overlay: 0.5 * base + 0.5 * sequential(map)
    raw: sequential(map) alone; the base only sets the size
    diverging: diverging(map) alone, for signed difference grids
    """
    try:
        mode = RenderMode(getattr(mode, "value", mode))
    except ValueError:
        raise ParameterError(f"unknown render mode {mode!r}") from None

    grid = np.asarray(getattr(saliency, "grid", saliency), dtype=np.float64)
    if grid.ndim != 2:
        raise DimensionError(f"heatmap grid must be 2-D, got {grid.shape}")
    layer = resize_grid(grid, (base.height, base.width))
    if layer.shape != base.pixels.shape[:2]:
        raise DimensionError(f"upsampled map {layer.shape} vs image {base.pixels.shape[:2]}")

    if mode is RenderMode.DIVERGING:
        return Image.from_array(colormap_diverging(layer))
    colored = colormap_sequential(layer)
    if mode is RenderMode.RAW:
        return Image.from_array(colored)
    return Image.from_array(0.5 * base.pixels + 0.5 * colored)
