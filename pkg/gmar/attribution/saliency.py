"""
Saliency maps - per-patch relevance grids in [0, 1]
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from gmar.config import CONSTANT_MAP_VALUE
from gmar.data.images import resize_grid
from gmar.errors import DimensionError


@dataclass(frozen=True)
class SaliencyMap:
    """
    P x P grid in [0, 1], row-major in patch order.

    `constant` marks maps whose raw values were all equal; those are
    stored as CONSTANT_MAP_VALUE everywhere.
    """

    grid: np.ndarray
    source_method: str = ""
    constant: bool = False

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.float64)
        if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
            raise DimensionError(f"saliency grid must be square 2-D, got {grid.shape}")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def grid_size(self) -> int:
        return self.grid.shape[0]

    def flat(self) -> np.ndarray:
        return self.grid.reshape(-1)

    def upsample(self, size: Union[int, Tuple[int, int]]) -> np.ndarray:
        """Bilinear upsample to pixel resolution."""
        if isinstance(size, int):
            size = (size, size)
        return resize_grid(self.grid, size)

    def with_grid(self, grid: np.ndarray) -> "SaliencyMap":
        return SaliencyMap(grid, self.source_method, self.constant)


def normalize(raw: np.ndarray, source_method: str = "") -> SaliencyMap:
    """Min-max normalize; a constant grid becomes all CONSTANT_MAP_VALUE."""
    raw = np.asarray(raw, dtype=np.float64)
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return SaliencyMap(np.full(raw.shape, CONSTANT_MAP_VALUE), source_method, constant=True)
    return SaliencyMap((raw - lo) / (hi - lo), source_method)


def grid_side(num_tokens: int) -> int:
    """P for a token count N = P^2 + 1."""
    side = math.isqrt(max(num_tokens - 1, 0))
    if num_tokens < 2 or side * side != num_tokens - 1:
        raise DimensionError(f"token count {num_tokens} is not P^2 + 1")
    return side


def cls_row_to_grid(rollout: np.ndarray, config=None, source_method: str = "") -> SaliencyMap:
    """
    Row 0 (CLS) of an N x N rollout, CLS column dropped, as a P x P map.

    `config` (a ViTConfig) is optional; when given, N must match it.
    """
    rollout = np.asarray(getattr(rollout, "data", rollout), dtype=np.float64)
    if rollout.ndim != 2 or rollout.shape[0] != rollout.shape[1]:
        raise DimensionError(f"rollout must be N x N, got {rollout.shape}")
    n = rollout.shape[0]
    side = grid_side(n)
    if config is not None and config.num_tokens != n:
        raise DimensionError(f"rollout has {n} tokens, model has {config.num_tokens}")
    return normalize(rollout[0, 1:].reshape(side, side), source_method)


def random_saliency(grid_size, seed: int = 0) -> SaliencyMap:
    """
    Uniform random control map, deterministic per seed.

    `grid_size` is P, or anything with a `grid_size` attribute (ViTConfig).
    """
    side = int(getattr(grid_size, "grid_size", grid_size))
    if side < 1:
        raise DimensionError(f"grid size must be >= 1, got {side}")
    rng = np.random.default_rng(seed)
    return normalize(rng.uniform(0.0, 1.0, size=(side, side)), "random")


def difference_map(a: SaliencyMap, b: SaliencyMap) -> np.ndarray:
    """Signed a - b in [-1, 1]."""
    if a.grid.shape != b.grid.shape:
        raise DimensionError(f"difference_map: {a.grid.shape} vs {b.grid.shape}")
    return a.grid - b.grid


def as_saliency(value, source_method: Optional[str] = None) -> SaliencyMap:
    """Pass SaliencyMaps through; normalize raw grids."""
    if isinstance(value, SaliencyMap):
        return value
    return normalize(np.asarray(value), source_method or "")
