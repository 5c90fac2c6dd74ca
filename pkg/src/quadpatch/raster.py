"""Pixel containers for the successive pipeline stages, plus PNG I/O.

Arrays are row-major ``(height, width[, channels])``. All containers are
treated as immutable after construction; operations return new instances.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError

__all__ = [
    "RasterImage",
    "GrayImage",
    "EdgeMap",
    "load_png",
    "save_png",
    "save_edge_png",
]


@dataclass(eq=False)
class RasterImage:
    """8-bit image, 1 (gray) or 3 (RGB) channels."""

    pixels: np.ndarray  # (h, w, c) uint8

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3:
            raise InputError(f"expected 2D or 3D pixel array, got shape {px.shape}")
        if px.shape[2] not in (1, 3):
            raise InputError(f"unsupported channel count {px.shape[2]} (want 1 or 3)")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InputError("image must be at least 1x1")
        if px.dtype != np.uint8:
            raise InputError(f"pixels must be uint8, got {px.dtype}")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(eq=False)
class GrayImage:
    """Single-channel floating-point image with values in [0, 1]."""

    values: np.ndarray  # (h, w) float64

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InputError(f"expected 2D value array, got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise InputError("image must be at least 1x1")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise InputError("gray values must lie in [0, 1]")
        self.values = v

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(eq=False)
class EdgeMap:
    """Binary mask marking detected edge pixels."""

    bits: np.ndarray  # (h, w) bool

    def __post_init__(self) -> None:
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise InputError(f"expected 2D bit array, got shape {b.shape}")
        if b.shape[0] < 1 or b.shape[1] < 1:
            raise InputError("edge map must be at least 1x1")
        self.bits = b.astype(bool, copy=False)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def edge_count(self) -> int:
        return int(self.bits.sum())


def load_png(source: str | Path | io.IOBase | bytes) -> RasterImage:
    """Decode a PNG (or any Pillow-readable image) into a RasterImage.

    Grayscale modes map to 1 channel; everything else is converted to RGB.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    try:
        with Image.open(source) as im:
            if im.mode in ("1", "L", "I", "I;16"):
                im = im.convert("L")
            elif im.mode == "LA":
                im = im.convert("L")
            elif im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot decode image: {exc}") from exc
    return RasterImage(arr)


def save_png(img: RasterImage, path: str | Path) -> None:
    arr = img.pixels[:, :, 0] if img.channels == 1 else img.pixels
    Image.fromarray(arr).save(path, format="PNG")


def save_edge_png(edges: EdgeMap, path: str | Path) -> None:
    """Export an edge map as a 1-bit-per-pixel PNG for debugging."""
    Image.fromarray(edges.bits).convert("1").save(path, format="PNG")
