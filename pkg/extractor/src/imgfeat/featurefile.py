"""Feature file writer.

This layout is the ingestion contract of the retrieval engine, implemented
here from the documented byte format so the two packages share nothing but
bytes.  Header (29 bytes, little-endian): magic "FPQ1", u32 version, u64
item count, u8 views per item, u32 floats per view, u32 vocabulary size,
u32 flags.  Then one record per item: u64 id, ceil(vocab/8) label bytes
(category i in byte i//8, bit i%8), and views * d_in float32 values in
view-major order.  No padding anywhere; a valid file has exactly the size
`file_size` predicts.
"""

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FPQ1"
VERSION = 1
_HEADER = struct.Struct("<4sIQBIII")
_MAX_VIEWS = 255  # the view count travels as a single byte


def label_width(vocab: int) -> int:
    return (vocab + 7) // 8


def label_bytes(category: "int | None", vocab: int) -> bytes:
    """Bitset for a single-category item; None means no bits set."""
    buf = bytearray(label_width(vocab))
    if category is not None:
        if not 0 <= category < vocab:
            raise ValueError(f"category {category} outside vocabulary of {vocab}")
        buf[category // 8] |= 1 << (category % 8)
    return bytes(buf)


def file_size(n: int, v: int, d_in: int, vocab: int) -> int:
    return _HEADER.size + n * (8 + label_width(vocab) + 4 * v * d_in)


def write_features(path: "str | Path", item_ids, categories, views, vocab: int) -> Path:
    """Write one feature file atomically (temp file, then rename).

    `views` is (N, V, D_in) float-like; `categories` holds one vocabulary
    index (or None) per item.  Rejects anything the reader would: bad
    shapes, non-finite values, duplicate ids, a view count over 255.
    """
    path = Path(path)
    feats = np.ascontiguousarray(views, dtype="<f4")
    if feats.ndim != 3:
        raise ValueError(f"views must be (N, V, D_in), got shape {feats.shape}")
    n, v, d_in = feats.shape
    if v < 1 or d_in < 1:
        raise ValueError("each item needs at least one view of at least one float")
    if v > _MAX_VIEWS:
        raise ValueError(f"view count {v} does not fit the format's single byte")
    if vocab < 0:
        raise ValueError("vocabulary size cannot be negative")
    if not np.isfinite(feats).all():
        raise ValueError("views contain non-finite values")
    ids = [int(i) for i in item_ids]
    if len(ids) != n or len(categories) != n:
        raise ValueError("item_ids, categories and views disagree on the item count")
    if any(i < 0 or i >= 1 << 64 for i in ids):
        raise ValueError("item ids must fit an unsigned 64-bit integer")
    if len(set(ids)) != n:
        raise ValueError("item ids must be unique")

    out = bytearray(_HEADER.pack(MAGIC, VERSION, n, v, d_in, vocab, 0))
    for row in range(n):
        out += struct.pack("<Q", ids[row])
        out += label_bytes(categories[row], vocab)
        out += feats[row].tobytes()

    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(out)
    os.replace(tmp, path)
    return path
