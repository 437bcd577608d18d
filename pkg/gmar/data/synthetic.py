"""
Synthetic Quadrant Dataset - desk-scale stand-in for Tiny-ImageNet

Class k draws a bright disc in quadrant k (0 top-left, 1 top-right,
2 bottom-left, 3 bottom-right) over low-amplitude uniform noise. The class
is recoverable from pixel content alone.
"""
import math
import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from gmar.config import SYNTHETIC_PROFILE
from gmar.data.images import Image
from gmar.errors import ParameterError

_DATASET_FLAG = re.compile(r"^synthetic:(\d+):(\d+)$")


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    num_classes: int = SYNTHETIC_PROFILE["num_classes"]
    samples_per_class: int = SYNTHETIC_PROFILE["samples_per_class"]
    image_size: int = SYNTHETIC_PROFILE["image_size"]
    seed: int = 0
    blob_min_value: float = SYNTHETIC_PROFILE["blob_min_value"]
    blob_radius: Tuple[int, int] = SYNTHETIC_PROFILE["blob_radius"]
    noise_max: float = SYNTHETIC_PROFILE["noise_max"]

    def __post_init__(self):
        if not 1 <= self.num_classes <= 4:
            raise ParameterError(f"num_classes must be 1..4 (one per quadrant), got {self.num_classes}")
        if self.samples_per_class < 1:
            raise ParameterError("samples_per_class must be >= 1")
        r_min, r_max = self.blob_radius
        if not 1 <= r_min <= r_max:
            raise ParameterError(f"invalid blob radius range {self.blob_radius}")
        if self.image_size % 2 or self.image_size // 2 < 2 * r_max + 1:
            raise ParameterError(
                f"image_size {self.image_size} must be even with quadrants fitting a radius-{r_max} disc"
            )
        if not self.noise_max < self.blob_min_value <= 1.0:
            raise ParameterError("blob must be brighter than the noise ceiling")


def quadrant_bounds(label: int, image_size: int) -> Tuple[int, int, int, int]:
    """(row_start, row_stop, col_start, col_stop) of quadrant `label`."""
    half = image_size // 2
    row, col = divmod(label, 2)
    return row * half, (row + 1) * half, col * half, (col + 1) * half


def _draw_sample(label: int, spec: SyntheticDatasetSpec, rng: np.random.Generator) -> Image:
    size = spec.image_size
    pixels = rng.uniform(0.0, spec.noise_max, size=(size, size, 3))

    r_min, r_max = spec.blob_radius
    radius = int(rng.integers(r_min, r_max + 1))
    top, bottom, left, right = quadrant_bounds(label, size)
    # jitter the center while keeping the whole disc inside the quadrant
    cy = int(rng.integers(top + radius, bottom - radius))
    cx = int(rng.integers(left + radius, right - radius))
    value = rng.uniform(spec.blob_min_value, 1.0)

    yy, xx = np.mgrid[0:size, 0:size]
    disc = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius
    pixels[disc] = value
    return Image(pixels)


def generate_synthetic(spec: SyntheticDatasetSpec) -> List[Tuple[Image, int]]:
    """
    Balanced dataset, classes interleaved (0, 1, 2, 3, 0, 1, ...).

    Deterministic per seed.
    """
    rng = np.random.default_rng(spec.seed)
    items = []
    for _ in range(spec.samples_per_class):
        for label in range(spec.num_classes):
            items.append((_draw_sample(label, spec, rng), label))
    return items


def parse_dataset_flag(flag: str) -> Tuple[int, int]:
    """'synthetic:SEED:N' -> (seed, N)."""
    match = _DATASET_FLAG.match(flag.strip())
    if match is None:
        raise ParameterError(f"dataset must look like synthetic:SEED:N, got {flag!r}")
    seed, count = int(match.group(1)), int(match.group(2))
    if count < 1:
        raise ParameterError("dataset size N must be >= 1")
    return seed, count


def synthetic_from_flag(flag: str, image_size: int = SYNTHETIC_PROFILE["image_size"],
                        num_classes: int = SYNTHETIC_PROFILE["num_classes"]) -> List[Tuple[Image, int]]:
    """Dataset for a 'synthetic:SEED:N' flag: the first N interleaved items."""
    seed, count = parse_dataset_flag(flag)
    spec = SyntheticDatasetSpec(
        num_classes=num_classes,
        samples_per_class=math.ceil(count / num_classes),
        image_size=image_size,
        seed=seed,
    )
    return generate_synthetic(spec)[:count]


def mirror_label_map(num_classes: int) -> Optional[List[int]]:
    """
    Class of a horizontally flipped sample: quadrants 0 <-> 1 and 2 <-> 3.

    None when some class would mirror onto a quadrant outside the dataset.
    """
    table = [label ^ 1 for label in range(num_classes)]
    if any(label >= num_classes for label in table):
        return None
    return table
