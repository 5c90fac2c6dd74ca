"""Command-line front end.

Subcommands: patch, dataset, grid, stats, cost, viz, reconstruct.
Exit codes: 0 success, 1 input error, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from .cache import CacheRecord, quantize_pixels, read_cache, write_cache
from .edges import resolution_schedule
from .errors import ConfigError, InputError
from .patching import PipelineConfig, reconstruct_mask, uniform_grid_patch
from .pipeline import (
    attention_cost,
    detect_edges,
    load_manifest,
    load_mask,
    preprocess_dataset,
    render_overlay,
    stats_report,
    tokenize_image,
)
from .quadtree import build_quadtree
from .raster import RasterImage, load_png, save_png

__all__ = ["build_parser", "main"]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline settings")
    g.add_argument("--split-value", type=int, default=20, help="edge count above which a region splits")
    g.add_argument("--depth", type=int, default=7, help="maximum subdivision depth")
    g.add_argument("--kernel", type=int, default=3, help="odd Gaussian kernel side")
    g.add_argument("--t-low", type=float, default=100.0, help="weak edge threshold (0-255 scale)")
    g.add_argument("--t-high", type=float, default=200.0, help="strong edge threshold (0-255 scale)")
    g.add_argument("--patch-size", type=int, default=4, help="side every token is resampled to")
    g.add_argument("--seq-len", type=int, default=512, help="fixed sequence length after pad/drop")
    g.add_argument("--seed", type=int, default=0, help="RNG seed for random token dropping")
    g.add_argument(
        "--schedule",
        action="store_true",
        help="derive kernel and depth from the image resolution instead",
    )


def _config(args: argparse.Namespace, img: RasterImage) -> PipelineConfig:
    kernel, depth = args.kernel, args.depth
    if args.schedule:
        kernel, depth = resolution_schedule(max(img.width, img.height))
    return PipelineConfig(
        split_value=args.split_value,
        depth_limit=depth,
        kernel=kernel,
        t_low=args.t_low,
        t_high=args.t_high,
        patch_size=args.patch_size,
        seq_len=args.seq_len,
        seed=args.seed,
    )


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_patch(args: argparse.Namespace) -> int:
    img = load_png(args.image)
    mask = load_mask(args.mask) if args.mask else None
    config = _config(args, img)
    seq, mask_seq, tree = tokenize_image(img, config, mask=mask)
    rec = CacheRecord(image_id=args.image, sequence=seq, mask=mask_seq)
    write_cache(args.out, [rec])
    if args.overlay:
        save_png(render_overlay(img, tree), args.overlay)
    print(
        f"{args.image}: {rec.real_count} tokens "
        f"(stored {len(seq.real_tokens)}, dropped {seq.dropped}, "
        f"grid {seq.grid_size}, patch {seq.patch_size}) -> {args.out}"
    )
    return 0


def _cmd_dataset(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    report = preprocess_dataset(manifest, args.out)
    for path, reason in report.skipped:
        print(f"warning: skipped {path}: {reason}", file=sys.stderr)
    _emit(report.to_json(), args.stats)
    return 0


def _cmd_grid(args: argparse.Namespace) -> int:
    img = load_png(args.image)
    seq = uniform_grid_patch(img, args.patch)
    write_cache(args.out, [CacheRecord(image_id=args.image, sequence=seq)])
    print(f"{args.image}: {len(seq.tokens)} uniform tokens (patch {args.patch}) -> {args.out}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    _emit(stats_report(read_cache(args.cache)).to_json(), args.out)
    return 0


def _cmd_cost(args: argparse.Namespace) -> int:
    est = attention_cost(args.resolution, args.patch, args.length)
    if args.json:
        print(est.to_json())
        return 0
    print(f"uniform N={est.uniform_length} entries={est.uniform_entries}")
    if args.length is not None:
        print(
            f"adaptive N={est.sequence_length} entries={est.entries} "
            f"ratio={est.ratio:.1f}x"
        )
    return 0


def _cmd_viz(args: argparse.Namespace) -> int:
    img = load_png(args.image)
    config = _config(args, img)
    tree = build_quadtree(detect_edges(img, config), config.split_value, config.depth_limit)
    save_png(render_overlay(img, tree), args.out)
    print(f"{args.image}: {tree.leaf_count()} leaves -> {args.out}")
    return 0


def _cmd_reconstruct(args: argparse.Namespace) -> int:
    records = read_cache(args.cache)
    if args.id is not None:
        matches = [r for r in records if r.image_id == args.id]
        if not matches:
            raise InputError(f"no record with id {args.id!r} in {args.cache}")
        rec = matches[0]
    else:
        if not 0 <= args.index < len(records):
            raise InputError(
                f"record index {args.index} out of range ({len(records)} records)"
            )
        rec = records[args.index]
    if rec.mask is None:
        raise InputError(f"record {rec.image_id!r} carries no mask tokens")
    real = rec.mask.real_tokens
    preds = np.stack([t.pixels[:, :, 0] for t in real]) if real else np.zeros(
        (0, rec.mask.patch_size, rec.mask.patch_size)
    )
    gray = reconstruct_mask(rec.mask, preds)
    save_png(RasterImage(quantize_pixels(gray.values)[:, :, None]), args.out)
    print(f"{rec.image_id}: mask {gray.width}x{gray.height} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadpatch",
        description="Edge-driven adaptive patching for high-resolution images.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("patch", help="tokenize one image into a cache file")
    p.add_argument("image", help="input PNG")
    p.add_argument("--mask", help="optional mask PNG cut with the same tree")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output cache file")
    p.add_argument("--overlay", help="also write a leaf-boundary overlay PNG")
    p.set_defaults(func=_cmd_patch)

    p = sub.add_parser("dataset", help="tokenize a manifest of images")
    p.add_argument("manifest", help="JSON manifest (entries + config)")
    p.add_argument("--out", required=True, help="output cache file")
    p.add_argument("--stats", help="write the stats JSON here instead of stdout")
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("grid", help="uniform-grid baseline tokenization")
    p.add_argument("image", help="input PNG")
    p.add_argument("--patch", type=int, required=True, help="grid patch side")
    p.add_argument("--out", required=True, help="output cache file")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("stats", help="summarize a cache file")
    p.add_argument("cache", help="cache file to read")
    p.add_argument("--out", help="write the stats JSON here instead of stdout")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("cost", help="attention-cost arithmetic")
    p.add_argument("--resolution", type=int, required=True, help="square image side")
    p.add_argument("--patch", type=int, required=True, help="uniform patch side")
    p.add_argument("--length", type=int, help="adaptive sequence length to compare")
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")
    p.set_defaults(func=_cmd_cost)

    p = sub.add_parser("viz", help="render the leaf partition over the image")
    p.add_argument("image", help="input PNG")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output overlay PNG")
    p.set_defaults(func=_cmd_viz)

    p = sub.add_parser("reconstruct", help="rebuild a mask PNG from cached tokens")
    p.add_argument("cache", help="cache file to read")
    p.add_argument("--index", type=int, default=0, help="record index (default 0)")
    p.add_argument("--id", help="select the record by image id instead")
    p.add_argument("--out", required=True, help="output mask PNG")
    p.set_defaults(func=_cmd_reconstruct)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
