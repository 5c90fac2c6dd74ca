"""Dataset-level driver: manifest loading, the full image -> token pass,
statistics, attention-cost arithmetic, split-value sweeps, and overlays.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cache import CacheRecord, write_cache
from .edges import EdgeConfig, canny, gaussian_blur, to_grayscale
from .errors import ConfigError, InputError
from .patching import (
    PipelineConfig,
    TokenSequence,
    copatch_mask,
    extract_patches,
    normalize_sequence,
)
from .quadtree import Quadtree, build_quadtree
from .raster import EdgeMap, GrayImage, RasterImage, load_png

__all__ = [
    "ManifestEntry",
    "DatasetManifest",
    "ImageStats",
    "StatsReport",
    "CostEstimate",
    "load_manifest",
    "load_mask",
    "detect_edges",
    "tokenize_image",
    "preprocess_dataset",
    "stats_report",
    "attention_cost",
    "sweep_split_values",
    "render_overlay",
]

_SEED_MOD = 1 << 64


@dataclass(frozen=True)
class ManifestEntry:
    ident: str  # image path as written in the manifest
    image: Path  # resolved
    mask: Path | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    config: PipelineConfig

    @property
    def count(self) -> int:
        return len(self.entries)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a dataset manifest.

    JSON shape::

        {"config": {"split_value": 20, ...},        # optional, keys as in
         "entries": [{"image": "a.png",             # PipelineConfig
                      "mask": "a_mask.png"}, ...]}  # mask optional

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise InputError(f"manifest {path} must be a JSON object")
    raw_cfg = payload.get("config", {})
    if not isinstance(raw_cfg, dict):
        raise ConfigError("manifest config must be an object")
    known = set(PipelineConfig.__dataclass_fields__)
    unknown = set(raw_cfg) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    config = PipelineConfig(**raw_cfg)
    raw_entries = payload.get("entries", [])
    if not isinstance(raw_entries, list):
        raise InputError("manifest entries must be a list")
    base = path.parent
    entries = []
    for i, item in enumerate(raw_entries):
        if not isinstance(item, dict) or "image" not in item:
            raise InputError(f"manifest entry {i} must be an object with an 'image' key")
        ident = str(item["image"])
        mask = item.get("mask")
        entries.append(
            ManifestEntry(
                ident=ident,
                image=base / ident,
                mask=None if mask is None else base / str(mask),
            )
        )
    return DatasetManifest(entries=tuple(entries), config=config)


def load_mask(source: str | Path) -> GrayImage:
    """Load a mask PNG as a [0, 1] gray map."""
    return to_grayscale(load_png(source))


def detect_edges(img: RasterImage, config: PipelineConfig) -> EdgeMap:
    """Grayscale, blur, and thin-edge detection with the pipeline settings."""
    cfg = EdgeConfig(kernel=config.kernel, t_low=config.t_low, t_high=config.t_high)
    return canny(gaussian_blur(to_grayscale(img), cfg), cfg)


def tokenize_image(
    img: RasterImage,
    config: PipelineConfig,
    *,
    mask: GrayImage | None = None,
    seed: int | None = None,
) -> tuple[TokenSequence, TokenSequence | None, Quadtree]:
    """Run the full single-image pass.

    Edge detection, tree construction, patch extraction, and length
    normalization; the mask (when given) is cut with the same tree and
    normalized with the same seed, so its tokens stay aligned with the
    image's through any random dropping.
    """
    if mask is not None and (mask.width, mask.height) != (img.width, img.height):
        raise InputError(
            f"mask size {(mask.width, mask.height)} does not match image size "
            f"{(img.width, img.height)}"
        )
    edges = detect_edges(img, config)
    tree = build_quadtree(edges, config.split_value, config.depth_limit)
    tokens = extract_patches(img, tree, config.patch_size)
    use_seed = config.seed if seed is None else seed
    seq = normalize_sequence(
        tokens,
        config.seq_len,
        use_seed,
        grid_size=tree.grid_size,
        original_size=tree.original_size,
    )
    mask_seq = None
    if mask is not None:
        mask_seq = normalize_sequence(
            copatch_mask(mask, tree, config.patch_size),
            config.seq_len,
            use_seed,
            grid_size=tree.grid_size,
            original_size=tree.original_size,
        )
    return seq, mask_seq, tree


@dataclass(frozen=True)
class ImageStats:
    image_id: str
    length: int  # leaf count before padding or dropping
    stored: int  # non-pad tokens kept in the sequence
    avg_patch_size: float  # mean leaf side over stored tokens
    seconds: float | None = None  # wall-clock preprocessing time


@dataclass(frozen=True)
class StatsReport:
    images: tuple[ImageStats, ...]
    skipped: tuple[tuple[str, str], ...] = ()  # (path, reason)

    @property
    def avg_length(self) -> float:
        if not self.images:
            return 0.0
        return float(np.mean([s.length for s in self.images]))

    @property
    def avg_patch_size(self) -> float:
        total = sum(s.stored for s in self.images)
        if total == 0:
            return 0.0
        return sum(s.avg_patch_size * s.stored for s in self.images) / total

    def length_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for s in self.images:
            hist[s.length] = hist.get(s.length, 0) + 1
        return hist

    def to_json(self) -> str:
        """Stable JSON rendering (sorted keys)."""
        payload = {
            "aggregate": {
                "image_count": len(self.images),
                "skipped_count": len(self.skipped),
                "avg_length": self.avg_length,
                "avg_patch_size": self.avg_patch_size,
            },
            "images": [
                {
                    "id": s.image_id,
                    "length": s.length,
                    "stored": s.stored,
                    "avg_patch_size": s.avg_patch_size,
                    "seconds": s.seconds,
                }
                for s in self.images
            ],
            "length_histogram": {str(k): v for k, v in self.length_histogram().items()},
            "skipped": [{"path": p, "reason": r} for p, r in self.skipped],
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def _image_stats(rec: CacheRecord, seconds: float | None = None) -> ImageStats:
    real = rec.sequence.real_tokens
    sizes = [t.size for t in real]
    return ImageStats(
        image_id=rec.image_id,
        length=rec.real_count,
        stored=len(real),
        avg_patch_size=float(np.mean(sizes)) if sizes else 0.0,
        seconds=seconds,
    )


def preprocess_dataset(manifest: DatasetManifest, cache_path: str | Path) -> StatsReport:
    """Tokenize every manifest entry into one cache file.

    Unreadable images and mismatched masks are skipped and recorded in the
    report; configuration failures abort. Each image draws its own drop seed
    (config seed + manifest index) so repeated runs are reproducible.
    """
    records = []
    images = []
    skipped = []
    for index, entry in enumerate(manifest.entries):
        start = time.perf_counter()
        try:
            img = load_png(entry.image)
            mask = None if entry.mask is None else load_mask(entry.mask)
            seq, mask_seq, _ = tokenize_image(
                img,
                manifest.config,
                mask=mask,
                seed=(manifest.config.seed + index) % _SEED_MOD,
            )
        except InputError as exc:
            skipped.append((entry.ident, str(exc)))
            continue
        rec = CacheRecord(image_id=entry.ident, sequence=seq, mask=mask_seq)
        records.append(rec)
        images.append(_image_stats(rec, seconds=time.perf_counter() - start))
    write_cache(cache_path, records)
    return StatsReport(images=tuple(images), skipped=tuple(skipped))


def stats_report(records: Sequence[CacheRecord]) -> StatsReport:
    """Summarize cached records (no timing information)."""
    return StatsReport(images=tuple(_image_stats(rec) for rec in records))


@dataclass(frozen=True)
class CostEstimate:
    """Attention-matrix size for a sequence versus the uniform-grid baseline."""

    resolution: int
    patch: int
    sequence_length: int
    entries: int  # sequence_length²
    uniform_length: int  # (resolution / patch)²
    uniform_entries: int  # (resolution / patch)⁴

    @property
    def ratio(self) -> float:
        return self.uniform_entries / self.entries

    def to_json(self) -> str:
        payload = {
            "resolution": self.resolution,
            "patch": self.patch,
            "sequence_length": self.sequence_length,
            "entries": self.entries,
            "uniform_length": self.uniform_length,
            "uniform_entries": self.uniform_entries,
            "ratio": self.ratio,
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def attention_cost(
    resolution: int, patch: int, adaptive_len: int | None = None
) -> CostEstimate:
    """Quadratic attention cost; self-attention matrices have N² entries.

    A uniform grid over a ``resolution`` square with ``patch`` tiles yields
    N = (resolution/patch)², hence (resolution/patch)⁴ entries. When
    ``adaptive_len`` is given it is used as N instead and the ratio tells
    how much smaller the adaptive matrix is.
    """
    if resolution < 1 or patch < 1:
        raise ConfigError("resolution and patch must be >= 1")
    if resolution % patch != 0:
        raise ConfigError(f"patch {patch} does not divide resolution {resolution}")
    uniform_len = (resolution // patch) ** 2
    n = uniform_len if adaptive_len is None else adaptive_len
    if n < 1:
        raise ConfigError(f"sequence length must be >= 1, got {n}")
    return CostEstimate(
        resolution=resolution,
        patch=patch,
        sequence_length=n,
        entries=n * n,
        uniform_length=uniform_len,
        uniform_entries=uniform_len * uniform_len,
    )


def sweep_split_values(
    images: Sequence[RasterImage],
    config: PipelineConfig,
    split_values: Iterable[int],
) -> list[tuple[int, float, float]]:
    """(split value, avg leaf side, avg leaf count) rows over a fixed corpus.

    Edge maps are computed once; only the tree is rebuilt per split value.
    """
    if not images:
        raise ConfigError("sweep needs at least one image")
    edge_maps = [detect_edges(img, config) for img in images]
    rows = []
    for v in split_values:
        lengths = []
        sides: list[int] = []
        for edges in edge_maps:
            tree = build_quadtree(edges, int(v), config.depth_limit)
            leaves = tree.leaves()
            lengths.append(len(leaves))
            sides.extend(leaf.region.size for leaf in leaves)
        rows.append((int(v), float(np.mean(sides)), float(np.mean(lengths))))
    return rows


def render_overlay(img: RasterImage, tree: Quadtree) -> RasterImage:
    """Copy of the image with every leaf outlined in pure green.

    Grayscale inputs are promoted to RGB so the highlight is visible; height
    and width never change. Leaves lying wholly in the padding area are
    skipped, partially covered ones are clipped.
    """
    if (img.width, img.height) != tree.original_size:
        raise ConfigError(
            f"image size {(img.width, img.height)} does not match the tree's "
            f"original size {tree.original_size}"
        )
    if img.channels == 1:
        canvas = np.repeat(img.pixels, 3, axis=2).copy()
    else:
        canvas = img.pixels.copy()
    color = np.array([0, 255, 0], dtype=np.uint8)
    w, h = img.width, img.height
    for leaf in tree.leaves():
        r = leaf.region
        if r.x >= w or r.y >= h:
            continue
        x1 = min(r.x + r.size, w) - 1
        y1 = min(r.y + r.size, h) - 1
        canvas[r.y, r.x : x1 + 1] = color
        canvas[y1, r.x : x1 + 1] = color
        canvas[r.y : y1 + 1, r.x] = color
        canvas[r.y : y1 + 1, x1] = color
    return RasterImage(canvas)
