"""Mixed-scale patch tokens: extraction, length normalization, baseline grid,
mask reconstruction, and the dice metric.

Every leaf's pixel block is projected to a common side length by exact box
(area-average) reduction, which is integral-preserving because leaf and
target sides are both powers of two. The inverse maps per-token predictions
back onto the full raster by nearest-neighbor upsampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .quadtree import Quadtree, morton_encode, ordered_leaves
from .raster import GrayImage, RasterImage

__all__ = [
    "PatchToken",
    "TokenSequence",
    "PipelineConfig",
    "extract_patches",
    "copatch_mask",
    "normalize_sequence",
    "uniform_grid_patch",
    "reconstruct_mask",
    "dice_score",
]


@dataclass(eq=False)
class PatchToken:
    """One token: a resampled pixel block plus its source geometry."""

    morton: int
    origin: tuple[int, int]  # (x, y) on the padded grid
    size: int  # original leaf side; 0 for pads
    pixels: np.ndarray  # (side, side, channels) float64 in [0, 1]
    is_pad: bool = False


@dataclass(eq=False)
class TokenSequence:
    """Fixed-length token sequence for one image.

    Real tokens come first in Morton order, pads (all-zero, flagged) fill the
    tail; ``dropped`` counts real tokens discarded to reach the length.
    """

    tokens: list[PatchToken]
    patch_size: int  # common resampled side
    grid_size: int  # padded power-of-two square side
    original_size: tuple[int, int]  # (width, height)
    channels: int
    seed: int  # RNG seed used for random dropping
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def real_tokens(self) -> list[PatchToken]:
        return [t for t in self.tokens if not t.is_pad]

    @property
    def pad_count(self) -> int:
        return sum(1 for t in self.tokens if t.is_pad)


@dataclass(frozen=True)
class PipelineConfig:
    """All tunables for the image -> token-sequence pipeline."""

    split_value: int = 20
    depth_limit: int = 7
    kernel: int = 3
    t_low: float = 100.0
    t_high: float = 200.0
    patch_size: int = 4  # side every patch is resampled to
    seq_len: int = 512  # fixed sequence length after pad/drop
    seed: int = 0

    def __post_init__(self) -> None:
        if self.split_value < 0:
            raise ConfigError(f"split value must be >= 0, got {self.split_value}")
        if self.depth_limit < 0:
            raise ConfigError(f"depth limit must be >= 0, got {self.depth_limit}")
        p = self.patch_size
        if p < 2 or (p & (p - 1)) != 0:
            raise ConfigError(f"patch size must be a power of two >= 2, got {p}")
        if self.seq_len < 1:
            raise ConfigError(f"sequence length must be >= 1, got {self.seq_len}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"kernel must be an odd integer >= 1, got {self.kernel}")
        if self.t_low > self.t_high:
            raise ConfigError(
                f"t_low ({self.t_low}) must not exceed t_high ({self.t_high})"
            )


def _pad_to_grid(values: np.ndarray, grid: int) -> np.ndarray:
    """Zero-pad (h, w, c) values bottom/right to (grid, grid, c)."""
    h, w = values.shape[:2]
    out = np.zeros((grid, grid) + values.shape[2:], dtype=np.float64)
    out[:h, :w] = values
    return out


def _box_reduce(block: np.ndarray, side: int) -> np.ndarray:
    """Area-average of a (s, s, c) block down to (side, side, c).

    Written as representative + mean offset so constant cells come out
    bit-exactly equal to their value.
    """
    s = block.shape[0]
    if s == side:
        return block.copy()
    f = s // side
    c = block.shape[2]
    rep = block[::f, ::f]
    cells = block.reshape(side, f, side, f, c)
    return rep + (cells - rep[:, None, :, None, :]).mean(axis=(1, 3))


def _extract(grid_values: np.ndarray, tree: Quadtree, patch_size: int) -> list[PatchToken]:
    if patch_size > tree.min_leaf_size:
        raise ConfigError(
            f"patch size {patch_size} exceeds the minimum possible leaf side "
            f"{tree.min_leaf_size} (grid {tree.grid_size}, depth limit "
            f"{tree.effective_depth_limit})"
        )
    tokens = []
    for leaf in ordered_leaves(tree):
        r = leaf.region
        block = grid_values[r.y : r.y + r.size, r.x : r.x + r.size]
        tokens.append(
            PatchToken(
                morton=tree.morton_of(leaf),
                origin=(r.x, r.y),
                size=r.size,
                pixels=_box_reduce(block, patch_size),
            )
        )
    return tokens


def extract_patches(img: RasterImage, tree: Quadtree, patch_size: int) -> list[PatchToken]:
    """Resample each leaf's pixel block to ``patch_size`` square tokens.

    The image is placed on the tree's padded grid (padding reads as zero), so
    the tree must have been built on this image's edge map.
    """
    if (img.width, img.height) != tree.original_size:
        raise ConfigError(
            f"image size {(img.width, img.height)} does not match the tree's "
            f"original size {tree.original_size}"
        )
    grid_values = _pad_to_grid(img.pixels.astype(np.float64) / 255.0, tree.grid_size)
    return _extract(grid_values, tree, patch_size)


def copatch_mask(mask: GrayImage, tree: Quadtree, patch_size: int) -> list[PatchToken]:
    """Cut a mask with the same tree geometry, so mask tokens correspond
    index-by-index with the image tokens."""
    if (mask.width, mask.height) != tree.original_size:
        raise ConfigError(
            f"mask size {(mask.width, mask.height)} does not match the tree's "
            f"original size {tree.original_size}"
        )
    grid_values = _pad_to_grid(mask.values[:, :, None], tree.grid_size)
    return _extract(grid_values, tree, patch_size)


def _pad_token(patch_size: int, channels: int) -> PatchToken:
    return PatchToken(
        morton=0,
        origin=(0, 0),
        size=0,
        pixels=np.zeros((patch_size, patch_size, channels)),
        is_pad=True,
    )


def normalize_sequence(
    tokens: list[PatchToken],
    seq_len: int,
    seed: int,
    *,
    grid_size: int,
    original_size: tuple[int, int],
) -> TokenSequence:
    """Pad or randomly drop Morton-sorted tokens to exactly ``seq_len``.

    Drops are chosen uniformly without replacement by a deterministic RNG
    seeded with ``seed``; survivors keep their Morton order. The same seed
    and token count always select the same survivor indices, so image and
    mask token lists normalized with one seed stay aligned.
    """
    if seq_len < 1:
        raise ConfigError(f"sequence length must be >= 1, got {seq_len}")
    if not tokens:
        raise ConfigError("token list must not be empty")
    if any(t.is_pad for t in tokens):
        raise ConfigError("input tokens must not contain pads")
    patch_size = tokens[0].pixels.shape[0]
    channels = tokens[0].pixels.shape[2]
    count = len(tokens)
    if count > seq_len:
        rng = np.random.default_rng(seed)
        drop = set(rng.choice(count, size=count - seq_len, replace=False).tolist())
        kept = [t for i, t in enumerate(tokens) if i not in drop]
        dropped = count - seq_len
    else:
        kept = list(tokens)
        kept.extend(_pad_token(patch_size, channels) for _ in range(seq_len - count))
        dropped = 0
    return TokenSequence(
        tokens=kept,
        patch_size=patch_size,
        grid_size=grid_size,
        original_size=original_size,
        channels=channels,
        seed=seed,
        dropped=dropped,
    )


def uniform_grid_patch(img: RasterImage, patch: int) -> TokenSequence:
    """Baseline grid: row-major non-overlapping patches, no resampling.

    The image is padded to the next power-of-two square; the patch side must
    divide it. Sequence length is (grid / patch)^2 with no pads or drops.
    """
    if patch < 1:
        raise ConfigError(f"patch side must be >= 1, got {patch}")
    if patch > min(img.width, img.height):
        raise ConfigError(
            f"patch side {patch} exceeds image side {min(img.width, img.height)}"
        )
    side = max(img.width, img.height)
    grid = 1 if side <= 1 else 1 << (side - 1).bit_length()
    if grid % patch != 0:
        raise ConfigError(f"patch side {patch} does not divide padded side {grid}")
    grid_values = _pad_to_grid(img.pixels.astype(np.float64) / 255.0, grid)
    tokens = []
    for y in range(0, grid, patch):
        for x in range(0, grid, patch):
            tokens.append(
                PatchToken(
                    morton=0,
                    origin=(x, y),
                    size=patch,
                    pixels=grid_values[y : y + patch, x : x + patch].copy(),
                )
            )
    # row-major order by definition; morton codes recorded only as metadata
    for t in tokens:
        t.morton = morton_encode(t.origin[0] // patch, t.origin[1] // patch)
    return TokenSequence(
        tokens=tokens,
        patch_size=patch,
        grid_size=grid,
        original_size=(img.width, img.height),
        channels=img.channels,
        seed=0,
        dropped=0,
    )


def reconstruct_mask(seq: TokenSequence, predictions: np.ndarray) -> GrayImage:
    """Paint per-token predictions back onto the full-resolution raster.

    ``predictions`` holds one (patch_size, patch_size) block per non-pad
    token, in sequence order, values in [0, 1]. Each block is upsampled by
    nearest neighbor to its leaf size and written at its origin; padded and
    dropped regions stay 0. The result is cropped to the original size.
    """
    real = seq.real_tokens
    preds = np.asarray(predictions, dtype=np.float64)
    expected = (len(real), seq.patch_size, seq.patch_size)
    if preds.shape != expected:
        raise ConfigError(f"predictions shape {preds.shape} != {expected}")
    canvas = np.zeros((seq.grid_size, seq.grid_size), dtype=np.float64)
    for token, block in zip(real, preds):
        x, y = token.origin
        f = token.size // seq.patch_size
        if f > 1:
            block = np.repeat(np.repeat(block, f, axis=0), f, axis=1)
        canvas[y : y + token.size, x : x + token.size] = block
    w, h = seq.original_size
    return GrayImage(canvas[:h, :w])


def dice_score(pred: GrayImage, truth: GrayImage) -> float:
    """2|X n Y| / (|X| + |Y|) after binarizing both masks at 0.5.

    Returns 1.0 when both masks are empty.
    """
    if pred.values.shape != truth.values.shape:
        raise ConfigError(
            f"mask shapes differ: {pred.values.shape} vs {truth.values.shape}"
        )
    x = pred.values >= 0.5
    y = truth.values >= 0.5
    total = int(x.sum()) + int(y.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((x & y).sum()) / total
