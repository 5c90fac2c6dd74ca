"""Binary on-disk cache for token sequences.

Layout (all integers little-endian):

    magic   4s   b"APF1"
    version u16  1
    count   u32  number of records

then per record:

    id_len  u32  followed by that many UTF-8 bytes
    grid    u32  padded square side
    width   u32  original image width
    height  u32  original image height
    chans   u8   pixel channels (1 or 3)
    patch   u16  resampled patch side
    seq_len u32  stored tokens per sequence (pads included)
    real    u32  leaf count before padding or dropping
    seed    u64  RNG seed used when dropping
    mask    u8   1 if a mask token section follows the image tokens

    seq_len image token entries, then (if mask) seq_len mask token entries,
    each entry being

        morton u64, x u32, y u32, size u32, is_pad u8,
        patch * patch * channels pixel bytes (u8, row-major)

Pixels are quantized with round-half-up to u8; reading maps them back to
[0, 1] floats, so one write-read cycle is lossy by at most 1/510 per value
and every later cycle is byte-stable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable

import numpy as np

from .errors import ConfigError, InputError
from .patching import PatchToken, TokenSequence

__all__ = [
    "CacheRecord",
    "write_cache",
    "read_cache",
    "quantize_pixels",
    "dequantize_pixels",
]

_MAGIC = b"APF1"
_VERSION = 1
_FILE_HEADER = struct.Struct("<4sHI")
_RECORD_FIXED = struct.Struct("<IIIBHIIQB")
_TOKEN_HEADER = struct.Struct("<QIIIB")


@dataclass(eq=False)
class CacheRecord:
    """One cached image: its token sequence and optional co-cut mask tokens."""

    image_id: str
    sequence: TokenSequence
    mask: TokenSequence | None = None

    @property
    def real_count(self) -> int:
        """Leaf count before length normalization (pads and drops undone)."""
        return len(self.sequence.real_tokens) + self.sequence.dropped


def quantize_pixels(pixels: np.ndarray) -> np.ndarray:
    """Map [0, 1] floats to u8 with round-half-up."""
    return np.floor(pixels * 255.0 + 0.5).astype(np.uint8)


def dequantize_pixels(raw: np.ndarray) -> np.ndarray:
    """Map u8 back to [0, 1] float64."""
    return raw.astype(np.float64) / 255.0


def _check_mask(record: CacheRecord) -> None:
    seq, mask = record.sequence, record.mask
    if mask is None:
        return
    if len(mask.tokens) != len(seq.tokens):
        raise ConfigError(
            f"mask has {len(mask.tokens)} tokens but image has {len(seq.tokens)}"
        )
    if mask.channels != 1:
        raise ConfigError(f"mask tokens must have 1 channel, got {mask.channels}")
    if (
        mask.patch_size != seq.patch_size
        or mask.grid_size != seq.grid_size
        or mask.original_size != seq.original_size
    ):
        raise ConfigError("mask geometry does not match the image sequence")


def _write_tokens(out: BinaryIO, tokens: list[PatchToken], patch: int, chans: int) -> None:
    for t in tokens:
        if t.pixels.shape != (patch, patch, chans):
            raise ConfigError(
                f"token pixel shape {t.pixels.shape} != {(patch, patch, chans)}"
            )
        out.write(
            _TOKEN_HEADER.pack(t.morton, t.origin[0], t.origin[1], t.size, int(t.is_pad))
        )
        out.write(np.ascontiguousarray(quantize_pixels(t.pixels)).tobytes())


def write_cache(path: str | Path, records: Iterable[CacheRecord]) -> int:
    """Write records to ``path``; returns the number written."""
    items = list(records)
    for rec in items:
        _check_mask(rec)
    with open(path, "wb") as out:
        out.write(_FILE_HEADER.pack(_MAGIC, _VERSION, len(items)))
        for rec in items:
            seq = rec.sequence
            ident = rec.image_id.encode("utf-8")
            out.write(struct.pack("<I", len(ident)))
            out.write(ident)
            out.write(
                _RECORD_FIXED.pack(
                    seq.grid_size,
                    seq.original_size[0],
                    seq.original_size[1],
                    seq.channels,
                    seq.patch_size,
                    len(seq.tokens),
                    rec.real_count,
                    seq.seed,
                    int(rec.mask is not None),
                )
            )
            _write_tokens(out, seq.tokens, seq.patch_size, seq.channels)
            if rec.mask is not None:
                _write_tokens(out, rec.mask.tokens, seq.patch_size, 1)
    return len(items)


class _Reader:
    """Cursor over the raw cache bytes."""

    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise InputError("cache file is truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple:
        return fmt.unpack(self.take(fmt.size))


def _read_tokens(
    r: _Reader, seq_len: int, patch: int, chans: int
) -> list[PatchToken]:
    tokens = []
    pixel_bytes = patch * patch * chans
    for _ in range(seq_len):
        morton, x, y, size, is_pad = r.unpack(_TOKEN_HEADER)
        raw = np.frombuffer(r.take(pixel_bytes), dtype=np.uint8)
        tokens.append(
            PatchToken(
                morton=morton,
                origin=(x, y),
                size=size,
                pixels=dequantize_pixels(raw.reshape(patch, patch, chans)),
                is_pad=bool(is_pad),
            )
        )
    return tokens


def read_cache(path: str | Path) -> list[CacheRecord]:
    """Read every record from a cache file written by :func:`write_cache`."""
    data = Path(path).read_bytes()
    r = _Reader(data)
    magic, version, count = r.unpack(_FILE_HEADER)
    if magic != _MAGIC:
        raise InputError(f"not a token cache file (magic {magic!r})")
    if version != _VERSION:
        raise InputError(f"unsupported cache version {version}")
    records = []
    for _ in range(count):
        (id_len,) = struct.unpack("<I", r.take(4))
        try:
            image_id = r.take(id_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"cache record id is not valid UTF-8: {exc}") from exc
        grid, width, height, chans, patch, seq_len, real, seed, has_mask = r.unpack(
            _RECORD_FIXED
        )
        tokens = _read_tokens(r, seq_len, patch, chans)
        non_pad = sum(1 for t in tokens if not t.is_pad)
        if non_pad != min(real, seq_len):
            raise InputError(
                f"record {image_id!r} stores {non_pad} real tokens but the "
                f"header implies {min(real, seq_len)}"
            )
        dropped = max(0, real - seq_len)
        seq = TokenSequence(
            tokens=tokens,
            patch_size=patch,
            grid_size=grid,
            original_size=(width, height),
            channels=chans,
            seed=seed,
            dropped=dropped,
        )
        mask = None
        if has_mask:
            mask = TokenSequence(
                tokens=_read_tokens(r, seq_len, patch, 1),
                patch_size=patch,
                grid_size=grid,
                original_size=(width, height),
                channels=1,
                seed=seed,
                dropped=dropped,
            )
        records.append(CacheRecord(image_id=image_id, sequence=seq, mask=mask))
    if r.pos != len(data):
        raise InputError(f"{len(data) - r.pos} trailing bytes after the last record")
    return records
