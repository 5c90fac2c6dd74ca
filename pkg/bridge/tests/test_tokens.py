import io

import numpy as np
import pytest

from quadpatch import (
    ConfigError,
    InputError,
    PipelineConfig,
    RasterImage,
    save_png,
    tokenize_image,
    write_cache,
)
from quadpatch.cache import CacheRecord

from quadpatch_bridge import TokenBatch, batch_sequences, load_batch, sequence_arrays, tokenize

CFG = PipelineConfig(split_value=4, depth_limit=3, patch_size=4, seq_len=32)


def noisy_image(seed: int, side: int = 32) -> RasterImage:
    rng = np.random.default_rng(seed)
    return RasterImage(rng.integers(0, 256, (side, side, 3), dtype=np.uint8))


def png_bytes(img: RasterImage) -> bytes:
    buf = io.BytesIO()
    save_png(img, buf)
    return buf.getvalue()


class TestTokenBatch:
    def test_shape_validation(self):
        with pytest.raises(InputError):
            TokenBatch(np.zeros((2, 8)), np.zeros((2, 8, 3)), np.zeros((2, 8), bool))
        with pytest.raises(InputError):
            TokenBatch(np.zeros((2, 8, 4)), np.zeros((2, 7, 3)), np.zeros((2, 8), bool))
        batch = TokenBatch(np.zeros((2, 8, 4)), np.zeros((2, 8, 3)), np.zeros((2, 8), bool))
        assert batch.batch_size == 2 and batch.length == 8


class TestSequenceArrays:
    def test_geometry_normalized_and_pads_zero(self):
        seq, _, _ = tokenize_image(noisy_image(3), CFG)
        pixels, geometry, pad = sequence_arrays(seq)
        assert pixels.shape == (32, 4 * 4 * 3)
        assert geometry.shape == (32, 3)
        assert np.all(geometry >= 0.0) and np.all(geometry <= 1.0)
        assert pad.tolist() == [t.is_pad for t in seq.tokens]
        assert np.all(pixels[pad] == 0.0)
        assert np.all(geometry[pad] == 0.0)

    def test_geometry_recovers_token_fields(self):
        seq, _, _ = tokenize_image(noisy_image(4), CFG)
        _, geometry, pad = sequence_arrays(seq)
        for row, token in zip(geometry[~pad], seq.real_tokens):
            x, y, size = row * seq.grid_size
            assert (round(x), round(y), round(size)) == (*token.origin, token.size)


class TestBatchSequences:
    def test_stacks_matching_sequences(self):
        seqs = [tokenize_image(noisy_image(s), CFG)[0] for s in (1, 2, 3)]
        batch = batch_sequences(seqs)
        assert batch.pixels.shape == (3, 32, 48)
        assert batch.geometry.shape == (3, 32, 3)
        assert batch.pad_mask.shape == (3, 32)

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            batch_sequences([])

    def test_mismatched_shapes_rejected(self):
        a, _, _ = tokenize_image(noisy_image(1), CFG)
        b, _, _ = tokenize_image(noisy_image(1), PipelineConfig(
            split_value=4, depth_limit=3, patch_size=4, seq_len=16))
        with pytest.raises(InputError):
            batch_sequences([a, b])


class TestTokenize:
    def test_bytes_path_and_stream_agree(self, tmp_path):
        img = noisy_image(7)
        path = tmp_path / "img.png"
        save_png(img, path)
        raw = png_bytes(img)
        from_bytes = tokenize(raw, CFG)
        from_path = tokenize(str(path), CFG)
        from_stream = tokenize(io.BytesIO(raw), CFG)
        assert np.array_equal(from_bytes.pixels, from_path.pixels)
        assert np.array_equal(from_bytes.pixels, from_stream.pixels)
        assert np.array_equal(from_bytes.geometry, from_path.geometry)
        assert from_bytes.batch_size == 1

    def test_blank_image_is_one_real_token_plus_pads(self):
        blank = RasterImage(np.zeros((32, 32, 3), np.uint8))
        cfg = PipelineConfig(split_value=0, depth_limit=3, patch_size=4, seq_len=16)
        batch = tokenize(png_bytes(blank), cfg)
        assert batch.length == 16
        assert int(batch.pad_mask.sum()) == 15
        assert not batch.pad_mask[0, 0]

    def test_garbage_bytes_propagate_input_error(self):
        with pytest.raises(InputError):
            tokenize(b"not a png", CFG)

    def test_config_errors_propagate(self):
        img = png_bytes(noisy_image(9, side=8))
        with pytest.raises(ConfigError):
            tokenize(img, PipelineConfig(split_value=4, depth_limit=9, patch_size=4, seq_len=8))


class TestLoadBatch:
    def test_matches_direct_tokenization_up_to_quantization(self, tmp_path):
        imgs = [noisy_image(s) for s in (5, 6)]
        seqs = [tokenize_image(img, CFG)[0] for img in imgs]
        path = tmp_path / "c.apt"
        write_cache(path, [CacheRecord(image_id=f"i{i}", sequence=s) for i, s in enumerate(seqs)])
        batch = load_batch(path)
        direct = batch_sequences(seqs)
        assert batch.pixels.shape == direct.pixels.shape
        assert np.array_equal(batch.pad_mask, direct.pad_mask)
        assert np.array_equal(batch.geometry, direct.geometry)
        assert np.max(np.abs(batch.pixels - direct.pixels)) <= 0.5 / 255.0

    def test_empty_cache_rejected(self, tmp_path):
        path = tmp_path / "e.apt"
        write_cache(path, [])
        with pytest.raises(InputError):
            load_batch(path)

    def test_heterogeneous_records_rejected(self, tmp_path):
        img = noisy_image(8)
        a, _, _ = tokenize_image(img, CFG)
        b, _, _ = tokenize_image(img, PipelineConfig(
            split_value=4, depth_limit=3, patch_size=4, seq_len=16))
        path = tmp_path / "h.apt"
        write_cache(path, [CacheRecord("a", a), CacheRecord("b", b)])
        with pytest.raises(InputError):
            load_batch(path)
