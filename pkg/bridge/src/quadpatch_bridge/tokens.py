"""Array-shaped views of token sequences for ML pipelines.

Everything here is a thin, reshuffling layer over quadpatch: tokenization
delegates to the library, so arrays produced through this module are
numerically identical to what the CLI writes into a cache file.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from quadpatch import (
    InputError,
    PipelineConfig,
    TokenSequence,
    load_png,
    read_cache,
    tokenize_image,
)

__all__ = ["TokenBatch", "batch_sequences", "load_batch", "sequence_arrays", "tokenize"]


@dataclass(frozen=True)
class TokenBatch:
    """Stacked token arrays ready for an encoder.

    Attributes:
        pixels: float64 [batch, length, patch*patch*channels], values in [0, 1].
        geometry: float64 [batch, length, 3]; each row is (x, y, size) divided
            by the padded grid side, so entries lie in [0, 1].
        pad_mask: bool [batch, length], true on padding rows. Padding rows are
            all zero in both arrays.
    """

    pixels: np.ndarray
    geometry: np.ndarray
    pad_mask: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3 or self.geometry.ndim != 3 or self.pad_mask.ndim != 2:
            raise InputError(
                "token batch needs pixels [B, L, F], geometry [B, L, 3] and pad_mask [B, L]"
            )
        b, length = self.pad_mask.shape
        if self.pixels.shape[:2] != (b, length) or self.geometry.shape != (b, length, 3):
            raise InputError(
                f"inconsistent batch shapes: pixels {self.pixels.shape}, "
                f"geometry {self.geometry.shape}, pad_mask {self.pad_mask.shape}"
            )

    @property
    def batch_size(self) -> int:
        return self.pad_mask.shape[0]

    @property
    def length(self) -> int:
        return self.pad_mask.shape[1]


def sequence_arrays(seq: TokenSequence) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten one sequence into (pixels [L, F], geometry [L, 3], pad [L])."""
    scale = float(seq.grid_size)
    pixels = np.stack([t.pixels.reshape(-1) for t in seq.tokens])
    geometry = np.array(
        [(t.origin[0] / scale, t.origin[1] / scale, t.size / scale) for t in seq.tokens]
    )
    pad = np.array([t.is_pad for t in seq.tokens], dtype=bool)
    return pixels, geometry, pad


def batch_sequences(seqs: Sequence[TokenSequence]) -> TokenBatch:
    """Stack sequences of identical length and token shape into one batch."""
    if not seqs:
        raise InputError("cannot batch zero sequences")
    parts = [sequence_arrays(s) for s in seqs]
    feature_shapes = {p[0].shape for p in parts}
    if len(feature_shapes) != 1:
        raise InputError(f"sequences disagree on token shape: {sorted(feature_shapes)}")
    return TokenBatch(
        pixels=np.stack([p[0] for p in parts]),
        geometry=np.stack([p[1] for p in parts]),
        pad_mask=np.stack([p[2] for p in parts]),
    )


def tokenize(image: bytes | str | Path | io.IOBase, config: PipelineConfig) -> TokenBatch:
    """Tokenize one image into a single-row batch.

    Accepts encoded image bytes, a path, or a readable stream; delegates to
    the library pipeline, so errors propagate unchanged.
    """
    seq, _, _ = tokenize_image(load_png(image), config)
    return batch_sequences([seq])


def load_batch(path: str | Path) -> TokenBatch:
    """Read every record of a cache file into one batch."""
    records = read_cache(path)
    if not records:
        raise InputError(f"cache {path} holds no records")
    return batch_sequences([r.sequence for r in records])
