"""Edge extraction: grayscale conversion, Gaussian smoothing, Canny detection.

All operations are pure functions over immutable inputs and fully
deterministic: identical input and config give bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .raster import EdgeMap, GrayImage, RasterImage

__all__ = [
    "EdgeConfig",
    "PARAMETER_SCHEDULE",
    "to_grayscale",
    "gaussian_kernel1d",
    "gaussian_blur",
    "canny",
    "resolution_schedule",
]

# (resolution, smoothing kernel side, quadtree depth limit), used by
# resolution_schedule for per-resolution defaults.
PARAMETER_SCHEDULE: tuple[tuple[int, int, int], ...] = (
    (512, 3, 9),
    (1024, 3, 10),
    (4096, 5, 12),
    (8192, 7, 13),
    (16384, 9, 14),
    (32768, 11, 15),
    (65536, 13, 16),
)


@dataclass(frozen=True)
class EdgeConfig:
    """Smoothing and Canny parameters.

    ``sigma == 0`` means "derive from the kernel size" via
    ``0.3 * ((kernel - 1) / 2 - 1) + 0.8``. Thresholds are expressed on the
    0-255 gradient-magnitude scale regardless of the internal [0, 1] pixel
    range.
    """

    kernel: int = 3
    sigma: float = 0.0
    t_low: float = 100.0
    t_high: float = 200.0

    def __post_init__(self) -> None:
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"kernel must be an odd integer >= 1, got {self.kernel}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be nonnegative, got {self.sigma}")
        if self.t_low > self.t_high:
            raise ConfigError(
                f"t_low ({self.t_low}) must not exceed t_high ({self.t_high})"
            )

    @property
    def effective_sigma(self) -> float:
        if self.sigma > 0:
            return self.sigma
        return 0.3 * ((self.kernel - 1) / 2 - 1) + 0.8


def to_grayscale(img: RasterImage) -> GrayImage:
    """Convert to single-channel [0, 1] using luma weights 0.299/0.587/0.114."""
    px = img.pixels.astype(np.float64)
    if img.channels == 1:
        gray = px[:, :, 0] / 255.0
    else:
        # fixed evaluation order keeps (255,255,255) -> exactly 1.0
        gray = (0.299 * px[:, :, 0] + 0.587 * px[:, :, 1] + 0.114 * px[:, :, 2]) / 255.0
    return GrayImage(np.minimum(gray, 1.0))


def gaussian_kernel1d(kernel: int, sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian window of odd length ``kernel``."""
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"kernel must be an odd integer >= 1, got {kernel}")
    if kernel == 1:
        return np.ones(1)
    radius = kernel // 2
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def _convolve1d_replicate(values: np.ndarray, weights: np.ndarray, axis: int) -> np.ndarray:
    """Correlate along one axis with edge replication at the borders.

    Computed as center + sum(w * (window - center)) so that constant inputs
    pass through bit-exactly (the kernel sum cancels).
    """
    radius = weights.size // 2
    if radius == 0:
        return values
    moved = np.moveaxis(values, axis, -1)
    pad = [(0, 0)] * (moved.ndim - 1) + [(radius, radius)]
    padded = np.pad(moved, pad, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, weights.size, axis=-1)
    center = moved[..., None]
    out = moved + np.einsum("...k,k->...", windows - center, weights)
    return np.moveaxis(out, -1, axis)


def gaussian_blur(img: GrayImage, cfg: EdgeConfig) -> GrayImage:
    """Separable Gaussian smoothing with replicated borders."""
    if cfg.kernel > min(img.width, img.height):
        raise ConfigError(
            f"kernel {cfg.kernel} exceeds image side {min(img.width, img.height)}"
        )
    weights = gaussian_kernel1d(cfg.kernel, cfg.effective_sigma)
    out = _convolve1d_replicate(img.values, weights, axis=1)
    out = _convolve1d_replicate(out, weights, axis=0)
    return GrayImage(np.clip(out, 0.0, 1.0))


def _sobel(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel gradients (gx along columns, gy along rows), replicated borders."""
    p = np.pad(values, 1, mode="edge")
    east = p[0:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]
    west = p[0:-2, 0:-2] + 2.0 * p[1:-1, 0:-2] + p[2:, 0:-2]
    south = p[2:, 0:-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]
    north = p[0:-2, 0:-2] + 2.0 * p[0:-2, 1:-1] + p[0:-2, 2:]
    return east - west, south - north


def _neighbor(values: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """values[y + dy, x + dx] gathered per pixel; 0 outside the image."""
    out = np.zeros_like(values)
    h, w = values.shape
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    yd = slice(max(-dy, 0), h + min(-dy, 0))
    xd = slice(max(-dx, 0), w + min(-dx, 0))
    out[yd, xd] = values[ys, xs]
    return out


# quantized gradient bins -> (dy, dx) step along the gradient axis
_NMS_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1))


def _nonmax_suppress(magnitude: np.ndarray, angle_deg: np.ndarray) -> np.ndarray:
    """Keep pixels that are local maxima along their quantized gradient axis.

    Ties on a plateau are broken asymmetrically (>= backward, > forward) so a
    flat two-pixel ridge keeps exactly one pixel and a constant image keeps
    none.
    """
    bins = (np.floor_divide(angle_deg + 22.5, 45.0).astype(np.int64)) % 4
    keep = np.zeros(magnitude.shape, dtype=bool)
    for b, (dy, dx) in enumerate(_NMS_OFFSETS):
        forward = _neighbor(magnitude, dy, dx)
        backward = _neighbor(magnitude, -dy, -dx)
        keep |= (bins == b) & (magnitude >= backward) & (magnitude > forward)
    return keep


def _dilate8(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy or dx:
                out |= _neighbor(mask, dy, dx)
    return out


def _hysteresis(strong: np.ndarray, weak: np.ndarray) -> np.ndarray:
    """Grow strong pixels through 8-connected weak pixels to a fixed point."""
    edges = strong.copy()
    frontier = strong
    while True:
        grown = _dilate8(frontier) & weak & ~edges
        if not grown.any():
            return edges
        edges |= grown
        frontier = grown


def canny(img: GrayImage, cfg: EdgeConfig) -> EdgeMap:
    """Canny edge detection on an already-smoothed image.

    Pipeline: Sobel gradients -> L2 magnitude -> direction quantized to four
    bins -> non-maximum suppression -> double threshold -> hysteresis with
    8-connectivity. Strong pixels (>= t_high) are kept; weak pixels
    (>= t_low) survive only when 8-connected to a strong pixel through weak
    pixels. Thresholds are given on the 0-255 scale and rescaled internally.
    """
    gx, gy = _sobel(img.values)
    magnitude = np.hypot(gx, gy)
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    ridge = _nonmax_suppress(magnitude, angle)
    strong = ridge & (magnitude >= cfg.t_high / 255.0)
    weak = ridge & (magnitude >= cfg.t_low / 255.0) & ~strong
    return EdgeMap(_hysteresis(strong, weak))


def resolution_schedule(resolution: int) -> tuple[int, int]:
    """Kernel size and depth limit for a given image resolution.

    The seven tabulated resolutions map exactly; anything else maps to the
    entry nearest in log2 space, ties going to the smaller resolution.
    """
    if resolution < 1:
        raise ConfigError(f"resolution must be >= 1, got {resolution}")
    target = math.log2(resolution)
    row = min(PARAMETER_SCHEDULE, key=lambda r: (abs(target - math.log2(r[0])), r[0]))
    return row[1], row[2]
