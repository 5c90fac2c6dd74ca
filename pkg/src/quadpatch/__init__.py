"""Adaptive patching for high-resolution images.

Images are tokenized by an edge-driven quadtree: regions rich in detected
edges split recursively, so busy areas get many small patches and flat areas
a few large ones. Leaves are serialized in Morton order, resampled to one
common side, and padded or randomly dropped to a fixed sequence length. The
geometry kept on every token makes mask reconstruction exact up to the
resampling.
"""

from .cache import (
    CacheRecord,
    dequantize_pixels,
    quantize_pixels,
    read_cache,
    write_cache,
)
from .edges import (
    PARAMETER_SCHEDULE,
    EdgeConfig,
    canny,
    gaussian_blur,
    gaussian_kernel1d,
    resolution_schedule,
    to_grayscale,
)
from .errors import ConfigError, InputError, QuadpatchError
from .patching import (
    PatchToken,
    PipelineConfig,
    TokenSequence,
    copatch_mask,
    dice_score,
    extract_patches,
    normalize_sequence,
    reconstruct_mask,
    uniform_grid_patch,
)
from .pipeline import (
    CostEstimate,
    DatasetManifest,
    ImageStats,
    ManifestEntry,
    StatsReport,
    attention_cost,
    detect_edges,
    load_manifest,
    load_mask,
    preprocess_dataset,
    render_overlay,
    stats_report,
    sweep_split_values,
    tokenize_image,
)
from .quadtree import (
    PartitionReport,
    QuadNode,
    Quadtree,
    Region,
    SummedAreaTable,
    build_quadtree,
    effective_depth_limit,
    integral_image,
    morton_encode,
    ordered_leaves,
    tree_to_dict,
    verify_partition,
)
from .raster import (
    EdgeMap,
    GrayImage,
    RasterImage,
    load_png,
    save_edge_png,
    save_png,
)

__version__ = "0.1.0"

__all__ = [
    "CacheRecord",
    "ConfigError",
    "CostEstimate",
    "DatasetManifest",
    "EdgeConfig",
    "EdgeMap",
    "GrayImage",
    "ImageStats",
    "InputError",
    "ManifestEntry",
    "PARAMETER_SCHEDULE",
    "PartitionReport",
    "PatchToken",
    "PipelineConfig",
    "QuadNode",
    "QuadpatchError",
    "Quadtree",
    "RasterImage",
    "Region",
    "StatsReport",
    "SummedAreaTable",
    "TokenSequence",
    "attention_cost",
    "build_quadtree",
    "canny",
    "copatch_mask",
    "dequantize_pixels",
    "detect_edges",
    "dice_score",
    "effective_depth_limit",
    "extract_patches",
    "gaussian_blur",
    "gaussian_kernel1d",
    "integral_image",
    "load_manifest",
    "load_mask",
    "load_png",
    "morton_encode",
    "normalize_sequence",
    "ordered_leaves",
    "preprocess_dataset",
    "quantize_pixels",
    "read_cache",
    "reconstruct_mask",
    "render_overlay",
    "resolution_schedule",
    "save_edge_png",
    "save_png",
    "stats_report",
    "sweep_split_values",
    "to_grayscale",
    "tokenize_image",
    "tree_to_dict",
    "uniform_grid_patch",
    "verify_partition",
    "write_cache",
]
