"""Tiny transformer segmentation demo on mixed-scale token sequences.

Trains a 2-layer encoder with a per-token linear head on synthetic shape
images, then reconstructs full-resolution masks from per-token predictions.
The point is plumbing, not benchmarks: tokens in, masks out, with the same
budget usable by either the adaptive tokenizer or a uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from quadpatch import (
    GrayImage,
    PipelineConfig,
    RasterImage,
    TokenSequence,
    dice_score,
    reconstruct_mask,
    tokenize_image,
    uniform_grid_patch,
)

from .tokens import TokenBatch, batch_sequences

__all__ = [
    "SIDE",
    "TOKEN_BUDGET",
    "TokenSegmenter",
    "ToyResult",
    "adaptive_config",
    "combined_loss",
    "encode_adaptive",
    "encode_uniform",
    "evaluate",
    "shapes_corpus",
    "toy_example",
]

SIDE = 128
TOKEN_BUDGET = 64
UNIFORM_PATCH = SIDE // int(TOKEN_BUDGET ** 0.5)


def shapes_corpus(count: int, side: int = SIDE, seed: int = 0) -> list[tuple[RasterImage, GrayImage]]:
    """Small bright circles or rectangles on a dark background, with fill masks.

    Shapes stay small relative to the canvas, the regime adaptive patching
    targets: detail concentrated in a sparse region of a mostly flat image.
    """
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        fill = np.zeros((side, side), dtype=bool)
        if rng.random() < 0.5:
            radius = float(rng.uniform(side * 0.04, side * 0.11))
            cx = float(rng.uniform(radius + 2, side - radius - 2))
            cy = float(rng.uniform(radius + 2, side - radius - 2))
            yy, xx = np.mgrid[0:side, 0:side]
            fill = np.hypot(xx - cx, yy - cy) < radius
        else:
            h = int(rng.integers(side // 16, side // 5))
            w = int(rng.integers(side // 16, side // 5))
            y0 = int(rng.integers(2, side - h - 2))
            x0 = int(rng.integers(2, side - w - 2))
            fill[y0 : y0 + h, x0 : x0 + w] = True
        values = np.full((side, side), 40, np.uint8)
        values[fill] = 220
        pairs.append((RasterImage(values[:, :, None]), GrayImage(fill.astype(np.float64))))
    return pairs


def adaptive_config(side: int = SIDE, seq_len: int = TOKEN_BUDGET) -> PipelineConfig:
    return PipelineConfig(split_value=5, depth_limit=5, patch_size=4, seq_len=seq_len)


def encode_adaptive(
    pairs: Sequence[tuple[RasterImage, GrayImage]], config: PipelineConfig
) -> tuple[TokenBatch, np.ndarray, list[TokenSequence]]:
    """Tokenize images and masks with one tree each; returns per-token targets."""
    seqs, mask_seqs = [], []
    for img, mask in pairs:
        seq, mask_seq, _ = tokenize_image(img, config, mask=mask)
        seqs.append(seq)
        mask_seqs.append(mask_seq)
    targets = np.stack(
        [np.stack([t.pixels.reshape(-1) for t in ms.tokens]) for ms in mask_seqs]
    )
    return batch_sequences(seqs), targets, seqs


def encode_uniform(
    pairs: Sequence[tuple[RasterImage, GrayImage]], patch: int = UNIFORM_PATCH
) -> tuple[TokenBatch, np.ndarray, list[TokenSequence]]:
    """Uniform-grid counterpart at the same token budget."""
    seqs, targets = [], []
    for img, mask in pairs:
        seqs.append(uniform_grid_patch(img, patch))
        mask_img = RasterImage((mask.values * 255).astype(np.uint8)[:, :, None])
        mask_seq = uniform_grid_patch(mask_img, patch)
        targets.append(np.stack([t.pixels.reshape(-1) for t in mask_seq.tokens]))
    return batch_sequences(seqs), np.stack(targets), seqs


class TokenSegmenter(nn.Module):
    """Linear embed of pixels+geometry, 2 encoder layers, per-token mask head."""

    def __init__(self, feature_dim: int, patch_size: int, d_model: int = 64):
        super().__init__()
        self.patch_size = patch_size
        self.embed = nn.Linear(feature_dim + 3, d_model)
        layer = nn.TransformerEncoderLayer(
            d_model, nhead=4, dim_feedforward=128, dropout=0.0, batch_first=True
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=2, enable_nested_tensor=False)
        self.head = nn.Linear(d_model, patch_size * patch_size)

    def forward(
        self, pixels: torch.Tensor, geometry: torch.Tensor, pad_mask: torch.Tensor
    ) -> torch.Tensor:
        x = self.embed(torch.cat([pixels, geometry], dim=-1))
        x = self.encoder(x, src_key_padding_mask=pad_mask)
        return self.head(x)


def combined_loss(
    logits: torch.Tensor,
    targets: torch.Tensor,
    pad_mask: torch.Tensor,
    w: float = 0.5,
    eps: float = 1.0,
) -> torch.Tensor:
    """w * binary cross-entropy + (1 - w) * soft dice, over non-pad tokens."""
    keep = ~pad_mask
    kept_logits = logits[keep]
    kept_targets = targets[keep]
    bce = nn.functional.binary_cross_entropy_with_logits(kept_logits, kept_targets)
    probs = torch.sigmoid(kept_logits)
    overlap = (probs * kept_targets).sum()
    soft_dice = (2.0 * overlap + eps) / (probs.sum() + kept_targets.sum() + eps)
    return w * bce + (1.0 - w) * (1.0 - soft_dice)


def _tensors(batch: TokenBatch, targets: np.ndarray):
    return (
        torch.from_numpy(batch.pixels).float(),
        torch.from_numpy(batch.geometry).float(),
        torch.from_numpy(batch.pad_mask),
        torch.from_numpy(targets).float(),
    )


def evaluate(
    model: TokenSegmenter,
    batch: TokenBatch,
    seqs: Sequence[TokenSequence],
    truths: Sequence[GrayImage],
) -> float:
    """Mean dice over reconstructed masks for one encoded corpus."""
    pixels, geometry, pad_mask, _ = _tensors(batch, np.zeros((1, 1, 1)))
    model.eval()
    with torch.no_grad():
        probs = torch.sigmoid(model(pixels, geometry, pad_mask)).numpy()
    scores = []
    for i, (seq, truth) in enumerate(zip(seqs, truths)):
        real = len(seq.real_tokens)
        side = seq.patch_size
        preds = probs[i, :real].reshape(real, side, side).astype(np.float64)
        scores.append(dice_score(reconstruct_mask(seq, preds), truth))
    return float(np.mean(scores))


@dataclass(frozen=True)
class ToyResult:
    dice: float
    untrained_dice: float
    steps: int
    final_loss: float
    token_budget: int


def toy_example(
    train_count: int = 200,
    test_count: int = 24,
    steps: int = 200,
    seed: int = 0,
    scheme: str = "adaptive",
) -> ToyResult:
    """Train the demo end to end and report held-out dice.

    Args:
        scheme: "adaptive" for edge-driven tokens, "uniform" for the grid
            baseline at the same token budget.
    """
    pairs = shapes_corpus(train_count + test_count, seed=seed)
    train_pairs, test_pairs = pairs[:train_count], pairs[train_count:]
    if scheme == "adaptive":
        config = adaptive_config()
        batch, targets, _ = encode_adaptive(train_pairs, config)
        test_batch, _, test_seqs = encode_adaptive(test_pairs, config)
    elif scheme == "uniform":
        batch, targets, _ = encode_uniform(train_pairs)
        test_batch, _, test_seqs = encode_uniform(test_pairs)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    truths = [mask for _, mask in test_pairs]

    torch.manual_seed(seed)
    model = TokenSegmenter(batch.pixels.shape[2], int(targets.shape[2] ** 0.5))
    untrained = evaluate(model, test_batch, test_seqs, truths)

    pixels, geometry, pad_mask, target_t = _tensors(batch, targets)
    optimizer = torch.optim.Adam(model.parameters(), lr=3e-3)
    loss = torch.zeros(())
    model.train()
    for _ in range(steps):
        optimizer.zero_grad()
        loss = combined_loss(model(pixels, geometry, pad_mask), target_t, pad_mask)
        loss.backward()
        optimizer.step()

    return ToyResult(
        dice=evaluate(model, test_batch, test_seqs, truths),
        untrained_dice=untrained,
        steps=steps,
        final_loss=float(loss.detach()),
        token_budget=batch.length,
    )
