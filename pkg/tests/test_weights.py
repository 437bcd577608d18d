"""Weight file format: round trips, header validation and corruption."""
import struct

import numpy as np
import pytest

from gmar.config import EXIT_DATA, WEIGHTS_MAGIC
from gmar.data import load_weights, save_weights
from gmar.data.weights import HEADER_SIZE, decode_weights, encode_weights, expected_file_size
from gmar.errors import (
    BadMagicError,
    ConfigError,
    FormatError,
    InvalidHeaderError,
    ShapeMismatchError,
    TruncatedDataError,
    exit_code_for,
)
from gmar.model import ViTConfig, init_params


def random_config(rng):
    patch = int(rng.choice([2, 4]))
    heads = int(rng.integers(1, 4))
    return ViTConfig(
        image_size=patch * int(rng.integers(1, 4)),
        patch_size=patch,
        embed_dim=heads * int(rng.integers(1, 4)),
        num_layers=int(rng.integers(1, 3)),
        num_heads=heads,
        mlp_dim=int(rng.integers(1, 9)),
        num_classes=int(rng.integers(1, 6)),
    )


def with_header(blob, fields=None, count=None):
    head = blob[:len(WEIGHTS_MAGIC)]
    config_block = struct.pack("<7I", *fields) if fields else blob[8:36]
    count_block = struct.pack("<I", count) if count is not None else blob[36:40]
    return head + config_block + count_block + blob[HEADER_SIZE:]


@pytest.fixture
def small_blob(small_config):
    return encode_weights(init_params(small_config, 3))


class TestRoundTrip:

    def test_random_models(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            config = random_config(rng)
            params = init_params(config, rng, std=0.5)
            blob = encode_weights(params)
            assert len(blob) == expected_file_size(config)
            loaded, loaded_config = decode_weights(blob)
            assert loaded_config == config
            assert loaded.names() == params.names()
            for name in params.names():
                np.testing.assert_array_equal(loaded[name], params[name].astype(np.float32).astype(np.float64))

    def test_file_round_trip_is_stable(self, tmp_path, small_config):
        params = init_params(small_config, 1)
        first = save_weights(params, tmp_path / "a.gmarw", small_config)
        loaded, config = load_weights(first)
        second = save_weights(loaded, tmp_path / "b.gmarw")
        assert first.read_bytes() == second.read_bytes()
        assert config == small_config

    def test_float32_values_survive_exactly(self, small_config):
        params = init_params(small_config, 2)
        narrowed = params.replace({n: params[n].astype(np.float32) for n in params.names()})
        loaded, _ = decode_weights(encode_weights(narrowed))
        assert loaded.checksum() == narrowed.checksum()

    def test_layout(self, small_config, small_blob):
        assert small_blob[:8] == b"GMARW001"
        assert struct.unpack("<7I", small_blob[8:36]) == small_config.as_tuple()
        assert struct.unpack("<I", small_blob[36:40])[0] == len(init_params(small_config, 0).names())
        name_len = struct.unpack("<I", small_blob[40:44])[0]
        assert small_blob[44:44 + name_len] == b"patch_embed.weight"

    def test_config_must_match(self, tmp_path, small_config, toy_config):
        with pytest.raises(ConfigError):
            save_weights(init_params(small_config, 0), tmp_path / "x.gmarw", toy_config)


class TestCorruption:

    def test_bad_magic(self, small_blob):
        with pytest.raises(BadMagicError) as info:
            decode_weights(b"NOTGMARW" + small_blob[8:])
        assert info.value.offset == 0
        assert exit_code_for(info.value) == EXIT_DATA

    def test_empty_file(self):
        with pytest.raises(BadMagicError):
            decode_weights(b"")

    @pytest.mark.parametrize("keep", [10, 39, 45, -1])
    def test_truncated(self, small_blob, keep):
        with pytest.raises(TruncatedDataError):
            decode_weights(small_blob[:keep])

    def test_invalid_config(self, small_blob):
        with pytest.raises(InvalidHeaderError) as info:
            decode_weights(with_header(small_blob, fields=(30, 8, 16, 2, 2, 32, 4)))
        assert info.value.offset == 8

    def test_zero_field(self, small_blob):
        with pytest.raises(InvalidHeaderError):
            decode_weights(with_header(small_blob, fields=(16, 8, 16, 0, 2, 32, 4)))

    def test_entry_count(self, small_blob):
        with pytest.raises(InvalidHeaderError) as info:
            decode_weights(with_header(small_blob, count=3))
        assert info.value.offset == 36

    def test_shapes_disagree_with_config(self, small_blob):
        with pytest.raises(ShapeMismatchError, match="fc1"):
            decode_weights(with_header(small_blob, fields=(16, 8, 16, 2, 2, 64, 4)))

    def test_unknown_name(self, small_blob):
        corrupted = small_blob.replace(b"patch_embed.weight", b"patch_embed.weighx", 1)
        with pytest.raises(ShapeMismatchError, match="unexpected"):
            decode_weights(corrupted)

    def test_trailing_bytes(self, small_blob):
        with pytest.raises(FormatError, match="trailing"):
            decode_weights(small_blob + b"\x00")

    def test_load_reports_format_errors(self, tmp_path):
        path = tmp_path / "junk.gmarw"
        path.write_bytes(b"hello world")
        with pytest.raises(BadMagicError):
            load_weights(path)
