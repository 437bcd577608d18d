"""
Perturbation curves - insertion and deletion at patch granularity

Patches are revealed (insertion) or removed (deletion) in descending
saliency order, ties going to the lower patch index. Each curve point is
the target-class probability of one single-image forward pass, so the
fully revealed image and the untouched image reproduce y_c exactly.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from gmar.attribution.saliency import SaliencyMap, as_saliency
from gmar.config import PERTURBATION_DEFAULTS
from gmar.errors import DimensionError, ParameterError
from gmar.metrics.scores import curve_auc
from gmar.model.trace import class_probability, predict
from gmar.model.vit import ModelParams, image_pixels


class BaselineKind(str, Enum):
    BLUR = "blur"
    GRAY = "gray"
    ZERO = "zero"


@dataclass(frozen=True)
class PerturbationConfig:
    """
    steps: number of perturbation steps K (None = one patch per step).
    blur_sigma: Gaussian sigma of the blur baseline (None = patch_size / 2).
    """

    steps: Optional[int] = PERTURBATION_DEFAULTS["steps"]
    insertion_baseline: BaselineKind = BaselineKind(PERTURBATION_DEFAULTS["insertion_baseline"])
    deletion_baseline: BaselineKind = BaselineKind(PERTURBATION_DEFAULTS["deletion_baseline"])
    gray_value: float = PERTURBATION_DEFAULTS["gray_value"]
    blur_sigma: Optional[float] = None

    def __post_init__(self):
        if self.steps is not None and int(self.steps) < 1:
            raise ParameterError(f"steps must be >= 1, got {self.steps}")
        insertion = _parse_baseline(self.insertion_baseline)
        deletion = _parse_baseline(self.deletion_baseline)
        if insertion not in (BaselineKind.BLUR, BaselineKind.GRAY):
            raise ParameterError(f"insertion baseline must be blur or gray, got {insertion.value}")
        if deletion not in (BaselineKind.ZERO, BaselineKind.GRAY):
            raise ParameterError(f"deletion baseline must be zero or gray, got {deletion.value}")
        if not 0.0 <= self.gray_value <= 1.0:
            raise ParameterError(f"gray_value must lie in [0, 1], got {self.gray_value}")
        if self.blur_sigma is not None and self.blur_sigma <= 0:
            raise ParameterError(f"blur_sigma must be > 0, got {self.blur_sigma}")
        object.__setattr__(self, "insertion_baseline", insertion)
        object.__setattr__(self, "deletion_baseline", deletion)

    @classmethod
    def from_profile(cls, profile: Mapping = PERTURBATION_DEFAULTS, **overrides) -> "PerturbationConfig":
        merged = {**profile, **overrides}
        return cls(**{k: merged[k] for k in cls.__dataclass_fields__ if k in merged})

    def resolved_steps(self, num_patches: int) -> int:
        if self.steps is None:
            return num_patches
        if self.steps > num_patches:
            raise ParameterError(f"steps {self.steps} exceeds the {num_patches} patches")
        return int(self.steps)

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "insertion_baseline": self.insertion_baseline.value,
            "deletion_baseline": self.deletion_baseline.value,
            "gray_value": self.gray_value,
            "blur_sigma": self.blur_sigma,
        }


def _parse_baseline(value) -> BaselineKind:
    try:
        return BaselineKind(str(getattr(value, "value", value)).lower())
    except ValueError:
        raise ParameterError(f"unknown baseline {value!r}") from None


@dataclass(frozen=True)
class PerturbationCurve:
    kind: str
    fractions: np.ndarray
    probabilities: np.ndarray
    auc: float

    def points(self):
        """[[fraction, probability], ...]"""
        return np.column_stack([self.fractions, self.probabilities]).tolist()


def build_baseline(pixels: np.ndarray, kind, patch_size: int, gray_value: float = 0.5,
                   sigma: Optional[float] = None) -> np.ndarray:
    """Blurred, gray or black replacement image of the same shape."""
    pixels = np.asarray(pixels, dtype=np.float64)
    kind = _parse_baseline(kind)
    if kind is BaselineKind.ZERO:
        return np.zeros_like(pixels)
    if kind is BaselineKind.GRAY:
        return np.full_like(pixels, gray_value)
    sigma = patch_size / 2.0 if sigma is None else sigma
    return gaussian_filter(pixels, sigma=(sigma, sigma, 0.0))


def reveal_order(saliency) -> np.ndarray:
    """Patch indices by descending saliency; ties by ascending index."""
    flat = as_saliency(saliency).flat()
    return np.argsort(-flat, kind="stable")


def step_counts(num_patches: int, steps: int) -> np.ndarray:
    """Patches touched after each step s = 0..K: floor(s * P^2 / K)."""
    return (np.arange(steps + 1) * num_patches) // steps


def patch_pixel_mask(patches: np.ndarray, grid_size: int, patch_size: int) -> np.ndarray:
    """(H, W) boolean mask covering the listed patches."""
    cells = np.zeros(grid_size * grid_size, dtype=bool)
    cells[patches] = True
    cells = cells.reshape(grid_size, grid_size)
    return np.kron(cells, np.ones((patch_size, patch_size), dtype=bool))


def _curve(params: ModelParams, pixels: np.ndarray, saliency: SaliencyMap, target_class: int,
           start: np.ndarray, end: np.ndarray, steps: int, kind: str) -> PerturbationCurve:
    config = params.config
    grid, patch = config.grid_size, config.patch_size
    if saliency.grid_size != grid:
        raise DimensionError(f"saliency grid {saliency.grid_size} vs model grid {grid}")
    order = reveal_order(saliency)
    counts = step_counts(config.num_patches, steps)

    probabilities = []
    for count in counts:
        mask = patch_pixel_mask(order[:count], grid, patch)[..., None]
        probabilities.append(class_probability(params, np.where(mask, end, start), target_class))
    fractions = counts / config.num_patches
    probabilities = np.asarray(probabilities)
    return PerturbationCurve(kind, fractions, probabilities, curve_auc(fractions, probabilities))


def _target(params, pixels, target_class):
    if target_class is None:
        target_class, _ = predict(params, pixels)
    return int(target_class)


def insertion_curve(params: ModelParams, image, saliency, config: Optional[PerturbationConfig] = None,
                    target_class: Optional[int] = None) -> PerturbationCurve:
    """Start from the insertion baseline, reveal original patches. Higher AUC is better."""
    config = config or PerturbationConfig()
    pixels = image_pixels(image)
    saliency = as_saliency(saliency)
    baseline = build_baseline(pixels, config.insertion_baseline, params.config.patch_size,
                              config.gray_value, config.blur_sigma)
    steps = config.resolved_steps(params.config.num_patches)
    return _curve(params, pixels, saliency, _target(params, pixels, target_class),
                  start=baseline, end=pixels, steps=steps, kind="insertion")


def deletion_curve(params: ModelParams, image, saliency, config: Optional[PerturbationConfig] = None,
                   target_class: Optional[int] = None) -> PerturbationCurve:
    """Start from the original, replace patches with the deletion baseline. Lower AUC is better."""
    config = config or PerturbationConfig()
    pixels = image_pixels(image)
    saliency = as_saliency(saliency)
    baseline = build_baseline(pixels, config.deletion_baseline, params.config.patch_size,
                              config.gray_value, config.blur_sigma)
    steps = config.resolved_steps(params.config.num_patches)
    return _curve(params, pixels, saliency, _target(params, pixels, target_class),
                  start=pixels, end=baseline, steps=steps, kind="deletion")


def masked_image(pixels: np.ndarray, saliency) -> np.ndarray:
    """image * bilinearly upsampled map, per channel."""
    pixels = np.asarray(pixels, dtype=np.float64)
    weights = as_saliency(saliency).upsample((pixels.shape[0], pixels.shape[1]))
    return pixels * weights[..., None]


def explanation_confidence(params: ModelParams, image, saliency,
                           target_class: Optional[int] = None) -> float:
    """o_c: target-class probability on the soft-masked image."""
    pixels = image_pixels(image)
    return class_probability(params, masked_image(pixels, saliency),
                             _target(params, pixels, target_class))
