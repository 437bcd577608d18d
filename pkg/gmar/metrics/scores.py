"""
Confidence scores - Average Drop, Average Increase, trapezoidal AUC

y_c is the target-class probability on the full image, o_c the same
probability on the explanation-masked image.
"""
from typing import Sequence, Tuple

import numpy as np

from gmar.errors import DimensionError, ParameterError


def _paired(base: Sequence[float], explained: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(base, dtype=np.float64).reshape(-1)
    o = np.asarray(explained, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise ParameterError("empty batch")
    if y.shape != o.shape:
        raise DimensionError(f"{y.size} base confidences vs {o.size} explanation confidences")
    return y, o


def per_image_drop(base: Sequence[float], explained: Sequence[float]) -> np.ndarray:
    """max(0, y_c - o_c) / y_c * 100 for each image."""
    y, o = _paired(base, explained)
    if np.any(y <= 0):
        raise ParameterError("base confidence y_c must be > 0")
    return np.maximum(0.0, y - o) / y * 100.0


def average_drop(base: Sequence[float], explained: Sequence[float]) -> float:
    """Mean percent confidence drop; images whose confidence rose contribute 0."""
    return float(per_image_drop(base, explained).mean())


def average_increase(base: Sequence[float], explained: Sequence[float]) -> float:
    """Percent of images with o_c strictly above y_c."""
    y, o = _paired(base, explained)
    return float(np.mean(o > y) * 100.0)


def curve_auc(fractions: Sequence[float], probabilities: Sequence[float]) -> float:
    """Trapezoidal area under probability-vs-fraction."""
    x = np.asarray(fractions, dtype=np.float64)
    y = np.asarray(probabilities, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError(f"curve fractions {x.shape} vs probabilities {y.shape}")
    if x.size < 2:
        raise ParameterError("a curve needs at least two points")
    return float(np.trapezoid(y, x))
