"""
Weight files (format version 1)

Layout, all integers u32 little-endian:

    magic      8 bytes  b"GMARW001"
    config     7 x u32  image_size, patch_size, embed_dim, num_layers,
                        num_heads, mlp_dim, num_classes
    count      u32      number of entries
    entries    count x { name_len u32, name UTF-8, rank u32, dims rank x u32,
                         values prod(dims) x f32 LE, row-major }

Parameters are stored as float32 and widened back to float64 on load.
"""
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from gmar.config import WEIGHTS_MAGIC
from gmar.errors import (
    BadMagicError,
    ConfigError,
    FormatError,
    InvalidHeaderError,
    ShapeMismatchError,
    TruncatedDataError,
)
from gmar.model.vit import ModelParams, ViTConfig, param_shapes

_U32 = struct.Struct("<I")
_CONFIG = struct.Struct("<7I")
HEADER_SIZE = len(WEIGHTS_MAGIC) + _CONFIG.size + _U32.size
_VALUE_DTYPE = np.dtype("<f4")


def entry_size(name: str, shape: Tuple[int, ...]) -> int:
    """Bytes one entry occupies on disk."""
    numel = int(np.prod(shape, dtype=np.int64))
    return _U32.size + len(name.encode("utf-8")) + _U32.size + _U32.size * len(shape) + 4 * numel


def expected_file_size(config: ViTConfig) -> int:
    return HEADER_SIZE + sum(entry_size(n, s) for n, s in param_shapes(config).items())


def encode_weights(params: ModelParams) -> bytes:
    chunks = [WEIGHTS_MAGIC, _CONFIG.pack(*params.config.as_tuple()), _U32.pack(len(params.tensors))]
    for name, array in params.tensors.items():
        encoded = name.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype=_VALUE_DTYPE).tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.pos + size
        if end > len(self.blob):
            raise TruncatedDataError(
                f"file ended inside {what} (needed {size} bytes, {len(self.blob) - self.pos} left)",
                offset=len(self.blob),
            )
        chunk = self.blob[self.pos:end]
        self.pos = end
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(_U32.size, what))[0]


def decode_weights(blob: bytes) -> Tuple[ModelParams, ViTConfig]:
    """
    Parse and validate a weight file.

    Magic is checked before anything else; then the stored config, then
    every entry's name and shape against the config.
    """
    reader = _Reader(blob)
    magic = blob[:len(WEIGHTS_MAGIC)]
    if magic != WEIGHTS_MAGIC:
        raise BadMagicError(f"not a weight file: magic {magic!r}, expected {WEIGHTS_MAGIC!r}", offset=0)
    reader.take(len(WEIGHTS_MAGIC), "magic")

    config_at = reader.pos
    fields = _CONFIG.unpack(reader.take(_CONFIG.size, "config block"))
    try:
        config = ViTConfig(*fields)
    except ConfigError as exc:
        raise InvalidHeaderError(f"stored config is invalid: {exc}", offset=config_at) from None

    expected = param_shapes(config)
    count_at = reader.pos
    count = reader.u32("entry count")
    if count != len(expected):
        raise InvalidHeaderError(
            f"{count} entries stored, config needs {len(expected)}", offset=count_at
        )

    tensors = {}
    for _ in range(count):
        entry_at = reader.pos
        name_len = reader.u32("entry name length")
        try:
            name = reader.take(name_len, "entry name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("entry name is not UTF-8", offset=entry_at + _U32.size) from None
        rank = reader.u32(f"rank of {name}")
        shape = struct.unpack(f"<{rank}I", reader.take(_U32.size * rank, f"dims of {name}"))
        if name not in expected:
            raise ShapeMismatchError(f"unexpected parameter {name!r}", offset=entry_at)
        if name in tensors:
            raise ShapeMismatchError(f"parameter {name!r} stored twice", offset=entry_at)
        if tuple(shape) != expected[name]:
            raise ShapeMismatchError(
                f"{name}: stored shape {tuple(shape)}, config implies {expected[name]}",
                offset=entry_at,
            )
        numel = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(4 * numel, f"values of {name}"), dtype=_VALUE_DTYPE)
        tensors[name] = values.astype(np.float64).reshape(shape)

    if reader.pos != len(blob):
        raise FormatError(f"{len(blob) - reader.pos} trailing bytes after last entry", offset=reader.pos)
    ordered = {name: tensors[name] for name in expected}
    return ModelParams(config, ordered), config


def save_weights(params: ModelParams, path: Union[str, Path], config: ViTConfig = None) -> Path:
    """Write WeightFileV1. `config`, when given, must match the params' own."""
    if config is not None and config != params.config:
        raise ConfigError("config does not match the parameters being saved")
    path = Path(path)
    path.write_bytes(encode_weights(params))
    return path


def load_weights(path: Union[str, Path]) -> Tuple[ModelParams, ViTConfig]:
    return decode_weights(Path(path).read_bytes())
