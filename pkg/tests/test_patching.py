import numpy as np
import pytest

from quadpatch import (
    ConfigError,
    EdgeMap,
    GrayImage,
    RasterImage,
    build_quadtree,
    copatch_mask,
    dice_score,
    extract_patches,
    normalize_sequence,
    PipelineConfig,
    reconstruct_mask,
    uniform_grid_patch,
)

from _synth import random_mask


def tree_for(img_side, v=0, h=10, bits=None):
    if bits is None:
        bits = np.ones((img_side, img_side), dtype=bool)
    return build_quadtree(EdgeMap(bits), v, h)


def checkerboard(side):
    yy, xx = np.mgrid[0:side, 0:side]
    return ((yy + xx) % 2 * 255).astype(np.uint8)


class TestPipelineConfig:
    def test_defaults_valid(self):
        cfg = PipelineConfig()
        assert cfg.split_value == 20
        assert (cfg.t_low, cfg.t_high) == (100.0, 200.0)

    def test_patch_size_must_be_pow2_at_least_2(self):
        for bad in (0, 1, 3, 6):
            with pytest.raises(ConfigError):
                PipelineConfig(patch_size=bad)
        PipelineConfig(patch_size=2)
        PipelineConfig(patch_size=16)

    def test_other_validations(self):
        with pytest.raises(ConfigError):
            PipelineConfig(seq_len=0)
        with pytest.raises(ConfigError):
            PipelineConfig(split_value=-1)
        with pytest.raises(ConfigError):
            PipelineConfig(kernel=4)
        with pytest.raises(ConfigError):
            PipelineConfig(t_low=250.0, t_high=200.0)


class TestExtractPatches:
    def test_constant_image_constant_tokens(self):
        img = RasterImage(np.full((32, 32, 3), 173, np.uint8))
        bits = np.zeros((32, 32), dtype=bool)
        bits[3:9, 3:9] = True
        tree = tree_for(32, v=4, h=3, bits=bits)
        assert tree.leaf_count() > 1
        tokens = extract_patches(img, tree, 4)
        for t in tokens:
            assert np.all(t.pixels == 173 / 255.0)

    def test_checkerboard_downsamples_to_half(self):
        img = RasterImage(checkerboard(4)[:, :, None])
        tree = tree_for(4, v=100, h=0)  # single root leaf
        (token,) = extract_patches(img, tree, 2)
        assert token.size == 4
        assert np.all(token.pixels == 0.5)

    def test_leaf_equal_to_patch_size_is_identity(self):
        rng = np.random.default_rng(8)
        px = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        img = RasterImage(px)
        tree = tree_for(8, v=0, h=2)  # all leaves 2x2... depth capped at 2
        tokens = extract_patches(img, tree, 2)
        for t in tokens:
            block = px[t.origin[1] : t.origin[1] + 2, t.origin[0] : t.origin[0] + 2]
            assert np.array_equal(t.pixels, block / 255.0)

    def test_padding_contributes_zeros(self):
        img = RasterImage(np.full((5, 5, 1), 255, np.uint8))
        bits = np.zeros((5, 5), dtype=bool)
        tree = build_quadtree(EdgeMap(bits), 0, 0)
        (token,) = extract_patches(img, tree, 2)
        # 8x8 grid holds a white 5x5 corner: mean = 25/64
        assert token.pixels.mean() == pytest.approx(25 / 64)

    def test_patch_larger_than_min_leaf_rejected(self):
        img = RasterImage(np.zeros((16, 16, 1), np.uint8))
        tree = tree_for(16, v=0, h=3)  # min possible leaf 2
        with pytest.raises(ConfigError):
            extract_patches(img, tree, 4)

    def test_size_mismatch_rejected(self):
        img = RasterImage(np.zeros((8, 8, 1), np.uint8))
        tree = tree_for(16)
        with pytest.raises(ConfigError):
            extract_patches(img, tree, 2)

    def test_mean_preservation(self):
        rng = np.random.default_rng(21)
        px = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
        img = RasterImage(px)
        bits = rng.random((64, 64)) < 0.2
        tree = tree_for(64, v=10, h=4, bits=bits)
        tokens = extract_patches(img, tree, 4)
        # area-weighted token mean equals the (here unpadded) image mean
        weighted = sum(t.pixels.mean() * t.size**2 for t in tokens) / tree.grid_size**2
        assert weighted == pytest.approx(px.mean() / 255.0, abs=1e-6)

    def test_token_geometry_fields(self):
        img = RasterImage(np.zeros((16, 16, 1), np.uint8))
        bits = np.zeros((16, 16), dtype=bool)
        bits[0, 0] = bits[0, 2] = True
        tree = build_quadtree(EdgeMap(bits), 1, 2)
        tokens = extract_patches(img, tree, 4)
        assert [t.size for t in tokens] == [4, 4, 4, 4, 8, 8, 8]
        assert tokens[0].origin == (0, 0)
        mortons = [t.morton for t in tokens]
        assert mortons == sorted(mortons)


class TestCopatchMask:
    def test_all_zero_mask(self):
        mask = GrayImage(np.zeros((16, 16)))
        tree = tree_for(16, v=0, h=2)
        for t in copatch_mask(mask, tree, 4):
            assert np.all(t.pixels == 0.0)

    def test_matches_extract_on_gray_content(self):
        rng = np.random.default_rng(3)
        px = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        img = RasterImage(px[:, :, None])
        mask = GrayImage(px.astype(np.float64) / 255.0)
        tree = tree_for(32, v=0, h=3)
        img_tokens = extract_patches(img, tree, 4)
        mask_tokens = copatch_mask(mask, tree, 4)
        assert len(img_tokens) == len(mask_tokens)
        for a, b in zip(img_tokens, mask_tokens):
            assert (a.morton, a.origin, a.size) == (b.morton, b.origin, b.size)
            assert np.allclose(a.pixels[:, :, 0], b.pixels[:, :, 0], atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        tree = tree_for(16)
        with pytest.raises(ConfigError):
            copatch_mask(GrayImage(np.zeros((8, 8))), tree, 2)


class TestNormalizeSequence:
    def _tokens(self, img_side=16, v=0, h=4):
        img = RasterImage(np.zeros((img_side, img_side, 1), np.uint8))
        tree = tree_for(img_side, v=v, h=h)
        return extract_patches(img, tree, tree.min_leaf_size), tree

    def test_padding_appends_flagged_zero_tokens(self):
        tokens, tree = self._tokens(16, v=0, h=1)  # 4 real tokens
        seq = normalize_sequence(tokens, 10, 7, grid_size=tree.grid_size, original_size=(16, 16))
        assert len(seq.tokens) == 10
        assert seq.dropped == 0
        assert [t.is_pad for t in seq.tokens] == [False] * 4 + [True] * 6
        for t in seq.tokens[4:]:
            assert np.all(t.pixels == 0.0)
            assert t.size == 0

    def test_identity_when_exact(self):
        tokens, tree = self._tokens(16, v=0, h=1)
        seq = normalize_sequence(tokens, 4, 0, grid_size=tree.grid_size, original_size=(16, 16))
        assert seq.tokens == tokens
        assert seq.dropped == 0 and seq.pad_count == 0

    def test_drop_preserves_order_and_is_seeded(self):
        tokens, tree = self._tokens(32, v=0, h=5)  # many real tokens
        assert len(tokens) > 10
        a = normalize_sequence(tokens, 10, 42, grid_size=tree.grid_size, original_size=(32, 32))
        b = normalize_sequence(tokens, 10, 42, grid_size=tree.grid_size, original_size=(32, 32))
        c = normalize_sequence(tokens, 10, 43, grid_size=tree.grid_size, original_size=(32, 32))
        assert [t.morton for t in a.tokens] == [t.morton for t in b.tokens]
        assert a.dropped == len(tokens) - 10
        assert all(not t.is_pad for t in a.tokens)
        mortons = [t.morton for t in a.tokens]
        assert mortons == sorted(mortons)
        assert [t.morton for t in c.tokens] != mortons  # 43 picks other survivors

    def test_input_pads_rejected(self):
        tokens, tree = self._tokens(16, v=0, h=1)
        seq = normalize_sequence(tokens, 8, 0, grid_size=tree.grid_size, original_size=(16, 16))
        with pytest.raises(ConfigError):
            normalize_sequence(seq.tokens, 8, 0, grid_size=tree.grid_size, original_size=(16, 16))


class TestUniformGrid:
    def test_512_over_8_gives_4096(self):
        img = RasterImage(np.zeros((512, 512, 1), np.uint8))
        seq = uniform_grid_patch(img, 8)
        assert len(seq.tokens) == 4096
        assert seq.pad_count == 0 and seq.dropped == 0

    def test_whole_image_single_token(self):
        img = RasterImage(np.zeros((64, 64, 1), np.uint8))
        seq = uniform_grid_patch(img, 64)
        assert len(seq.tokens) == 1

    def test_row_major_origins(self):
        img = RasterImage(np.zeros((16, 16, 1), np.uint8))
        seq = uniform_grid_patch(img, 4)
        origins = [t.origin for t in seq.tokens]
        assert origins[:4] == [(0, 0), (4, 0), (8, 0), (12, 0)]
        assert origins[-1] == (12, 12)
        assert len(origins) == 16

    def test_patch_exceeding_image_rejected(self):
        img = RasterImage(np.zeros((16, 16, 1), np.uint8))
        with pytest.raises(ConfigError):
            uniform_grid_patch(img, 32)

    def test_non_square_padded(self):
        img = RasterImage(np.full((10, 20, 1), 255, np.uint8))
        seq = uniform_grid_patch(img, 8)
        assert seq.grid_size == 32
        assert len(seq.tokens) == 16


class TestReconstruct:
    def test_single_root_token_all_ones(self):
        img = RasterImage(np.zeros((16, 16, 1), np.uint8))
        tree = tree_for(16, v=1000, h=0)
        tokens = extract_patches(img, tree, 4)
        seq = normalize_sequence(tokens, 1, 0, grid_size=16, original_size=(16, 16))
        out = reconstruct_mask(seq, np.ones((1, 4, 4)))
        assert np.all(out.values == 1.0)
        assert out.values.shape == (16, 16)

    def test_nearest_neighbor_block_expansion(self):
        img = RasterImage(np.zeros((4, 4, 1), np.uint8))
        tree = tree_for(4, v=100, h=4)  # one 4x4 leaf
        tokens = extract_patches(img, tree, 2)
        seq = normalize_sequence(tokens, 1, 0, grid_size=4, original_size=(4, 4))
        pred = np.array([[[0.0, 1.0], [0.0, 1.0]]])
        out = reconstruct_mask(seq, pred)
        assert np.all(out.values[:, :2] == 0.0)
        assert np.all(out.values[:, 2:] == 1.0)

    def test_full_depth_round_trip_exact(self):
        rng = np.random.default_rng(99)
        for _ in range(20):
            mask = random_mask(rng, max_side=64)
            bits = np.ones((mask.height, mask.width), dtype=bool)
            tree = build_quadtree(EdgeMap(bits), 0, 30)
            p = tree.min_leaf_size
            tokens = copatch_mask(mask, tree, p)
            seq = normalize_sequence(
                tokens, len(tokens), 0, grid_size=tree.grid_size, original_size=tree.original_size
            )
            preds = np.stack([t.pixels[:, :, 0] for t in seq.tokens])
            out = reconstruct_mask(seq, preds)
            assert np.array_equal(out.values, mask.values)

    def test_dropped_regions_become_zero(self):
        mask = GrayImage(np.ones((16, 16)))
        tree = tree_for(16, v=0, h=2)
        tokens = copatch_mask(mask, tree, 4)
        seq = normalize_sequence(tokens, 10, 5, grid_size=16, original_size=(16, 16))
        assert seq.dropped == 6
        preds = np.stack([t.pixels[:, :, 0] for t in seq.tokens])
        out = reconstruct_mask(seq, preds)
        assert int((out.values == 0.0).sum()) == 6 * 16
        assert int((out.values == 1.0).sum()) == 10 * 16

    def test_prediction_count_mismatch_rejected(self):
        img = RasterImage(np.zeros((8, 8, 1), np.uint8))
        tree = tree_for(8, v=100, h=1)
        tokens = extract_patches(img, tree, 2)
        seq = normalize_sequence(tokens, 5, 0, grid_size=8, original_size=(8, 8))
        with pytest.raises(ConfigError):
            reconstruct_mask(seq, np.ones((3, 2, 2)))


class TestDice:
    def test_identical_masks(self):
        m = GrayImage((np.random.default_rng(1).random((10, 10)) < 0.5).astype(float))
        assert dice_score(m, m) == 1.0

    def test_disjoint_masks(self):
        a = np.zeros((4, 4))
        b = np.zeros((4, 4))
        a[0, 0] = 1.0
        b[3, 3] = 1.0
        assert dice_score(GrayImage(a), GrayImage(b)) == 0.0

    def test_half_overlap(self):
        a = np.zeros((4, 4))
        b = np.zeros((4, 4))
        a[0, :4] = 1.0
        b[0, 2:] = 1.0
        b[1, :2] = 1.0
        assert dice_score(GrayImage(a), GrayImage(b)) == 0.5

    def test_both_empty_is_one(self):
        z = GrayImage(np.zeros((5, 5)))
        assert dice_score(z, z) == 1.0

    def test_symmetric(self):
        rng = np.random.default_rng(6)
        a = GrayImage((rng.random((12, 12)) < 0.4).astype(float))
        b = GrayImage((rng.random((12, 12)) < 0.4).astype(float))
        assert dice_score(a, b) == dice_score(b, a)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            dice_score(GrayImage(np.zeros((4, 4))), GrayImage(np.zeros((5, 5))))
