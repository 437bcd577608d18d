"""
Images - binary PPM (P6) codec and bilinear resizing

Pixels are row-major RGB float64 in [0, 1]. The model consumes them as-is
(no mean/std shift), so saved weights and inference always agree.
"""
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from gmar.errors import DimensionError, FormatError, ParameterError, TruncatedDataError

_PPM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


@dataclass(frozen=True)
class Image:
    """RGB image, pixels shaped (height, width, 3) with values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float64)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise DimensionError(f"image pixels must be (H, W, 3), got {pixels.shape}")
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            raise ParameterError("image values must lie in [0, 1]")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def from_array(cls, array) -> "Image":
        """Build from any array, clamping into [0, 1]."""
        return cls(np.clip(np.asarray(array, dtype=np.float64), 0.0, 1.0))


def encode_ppm(image: Image) -> bytes:
    """P6, maxval 255. Values are clamped, then rounded to the nearest level."""
    levels = np.rint(np.clip(image.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + levels.tobytes()


def decode_ppm(blob: bytes) -> Image:
    """
    Parse a binary PPM.

    Only P6 with maxval 255 is accepted; every failure reports the byte
    offset where parsing stopped.
    """
    fields = []
    pos = 0
    for _ in range(4):
        match = _PPM_TOKEN.match(blob, pos)
        if match is None:
            raise TruncatedDataError("PPM header ended early", offset=pos)
        fields.append((match.group(1), match.start(1)))
        pos = match.end(1)

    (magic, magic_at), (w_raw, w_at), (h_raw, h_at), (max_raw, max_at) = fields
    if magic != b"P6":
        raise FormatError(f"expected PPM magic P6, found {magic[:8]!r}", offset=magic_at)
    try:
        width, height, maxval = int(w_raw), int(h_raw), int(max_raw)
    except ValueError:
        raise FormatError("PPM header fields must be integers", offset=w_at) from None
    if width < 1 or height < 1:
        raise FormatError(f"PPM size {width}x{height} is empty", offset=w_at if width < 1 else h_at)
    if maxval != 255:
        raise FormatError(f"unsupported PPM maxval {maxval} (only 255)", offset=max_at)
    if pos >= len(blob) or not blob[pos:pos + 1].isspace():
        raise FormatError("missing whitespace after PPM maxval", offset=pos)
    pos += 1

    needed = width * height * 3
    body = blob[pos:pos + needed]
    if len(body) < needed:
        raise TruncatedDataError(
            f"PPM pixel data has {len(body)} of {needed} bytes", offset=pos + len(body)
        )
    levels = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
    return Image(levels.astype(np.float64) / 255.0)


def load_image_ppm(path: Union[str, Path]) -> Image:
    return decode_ppm(Path(path).read_bytes())


def save_image_ppm(image: Image, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_bytes(encode_ppm(image))
    return path


def _source_coords(out_size: int, in_size: int):
    """Half-pixel-center sampling positions, clamped to the source edge."""
    scale = in_size / out_size
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, in_size - 1)
    frac = src - lo
    return lo, hi, frac


def resize_grid(grid: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """
    Bilinear resize of the first two axes of `grid` to (height, width).

    Convention: output pixel centers map to (i + 0.5) * in/out - 0.5 in the
    source, clamped to the edge. Same-size resizes are exact copies.
    """
    out_h, out_w = size
    if out_h < 1 or out_w < 1:
        raise ParameterError(f"resize target must be >= 1, got {size}")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim < 2:
        raise DimensionError(f"resize needs a 2-D grid, got {grid.shape}")
    y0, y1, fy = _source_coords(out_h, grid.shape[0])
    x0, x1, fx = _source_coords(out_w, grid.shape[1])
    extra = (1,) * (grid.ndim - 2)
    fy = fy.reshape((-1, 1) + extra)
    fx = fx.reshape((1, -1) + extra)

    # lerp form a + (b - a) * t keeps constant regions bit-exact
    top = grid[y0][:, x0] + (grid[y0][:, x1] - grid[y0][:, x0]) * fx
    bottom = grid[y1][:, x0] + (grid[y1][:, x1] - grid[y1][:, x0]) * fx
    return top + (bottom - top) * fy


def resize_bilinear(image: Image, target_size: Union[int, Tuple[int, int]]) -> Image:
    """Resize to a square side or an explicit (height, width)."""
    if isinstance(target_size, int):
        target_size = (target_size, target_size)
    return Image.from_array(resize_grid(image.pixels, target_size))
