"""On-disk formats: feature files, parameter snapshots, code databases.

All formats are little-endian and versioned; unknown versions are rejected,
never guessed.  Writers go through a temp file + rename so readers never
observe a partial file.  Feature payloads are float32 on disk and promoted
to float64 by the consumers that need it.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Hyperparams
from .data import FeatureSet, label_bytes
from .errors import (
    ChecksumError,
    DimensionError,
    MagicError,
    NonFiniteError,
    TruncationError,
    VersionError,
)
from .quantizer import Codebooks
from .retrieval import CodeDatabase, code_dtype
from .trainer import ProjectionHead

FEATURE_MAGIC = b"FPQ1"
SNAPSHOT_MAGIC = b"FPQS"
DATABASE_MAGIC = b"FPQD"
FORMAT_VERSION = 1

_FEATURE_HEADER = struct.Struct("<4sIQBIII")
_SNAPSHOT_HEADER = struct.Struct("<4sI")
_DATABASE_HEADER = struct.Struct("<4sIQIIIIq32s")
_HYPER_BLOCK = struct.Struct("<ddIddIIIIddqqB")


def _atomic_write(path: "str | Path", blob: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class FeatureHeader:
    n: int
    v: int
    d_in: int
    vocab: int
    flags: int

    @property
    def item_bytes(self) -> int:
        return 8 + label_bytes(self.vocab) + self.v * self.d_in * 4


def _read_feature_header(blob: bytes, path) -> FeatureHeader:
    if len(blob) < _FEATURE_HEADER.size:
        raise TruncationError(f"{path}: file shorter than the feature header")
    magic, version, n, v, d_in, vocab, flags = _FEATURE_HEADER.unpack_from(blob)
    if magic != FEATURE_MAGIC:
        raise MagicError(f"{path}: expected magic {FEATURE_MAGIC!r}, found {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported feature format version {version}")
    if v < 1 or d_in < 1:
        raise DimensionError(f"{path}: header declares V={v}, D_in={d_in}")
    return FeatureHeader(n=n, v=v, d_in=d_in, vocab=vocab, flags=flags)


def peek_features(path: "str | Path") -> FeatureHeader:
    """Read just the header of a feature file."""
    with open(path, "rb") as f:
        blob = f.read(_FEATURE_HEADER.size)
    return _read_feature_header(blob, path)


def read_features(path: "str | Path") -> FeatureSet:
    """Load and fully validate a feature file."""
    blob = Path(path).read_bytes()
    header = _read_feature_header(blob, path)
    expected = _FEATURE_HEADER.size + header.n * header.item_bytes
    if len(blob) != expected:
        raise TruncationError(
            f"{path}: payload is {len(blob)} bytes, header implies exactly {expected}"
        )
    w = label_bytes(header.vocab)
    record = np.dtype([
        ("id", "<u8"),
        ("label", "u1", (w,)),
        ("feat", "<f4", (header.v, header.d_in)),
    ])
    records = np.frombuffer(blob, dtype=record, count=header.n, offset=_FEATURE_HEADER.size)
    features = records["feat"].astype(np.float32).reshape(header.n, header.v, header.d_in)
    if not np.isfinite(features).all():
        raise NonFiniteError(f"{path}: feature payload contains NaN or infinity")
    return FeatureSet(
        item_ids=records["id"].astype(np.uint64),
        labels=records["label"].reshape(header.n, w).copy(),
        features=features,
        vocab=header.vocab,
        flags=header.flags,
    )


def write_features(path: "str | Path", fs: FeatureSet) -> None:
    """Serialize a FeatureSet to the feature-file byte layout."""
    if not np.isfinite(fs.features).all():
        raise NonFiniteError("refusing to write non-finite features")
    header = _FEATURE_HEADER.pack(
        FEATURE_MAGIC, FORMAT_VERSION, fs.n_items, fs.n_views, fs.dim, fs.vocab, fs.flags
    )
    w = label_bytes(fs.vocab)
    record = np.dtype([
        ("id", "<u8"),
        ("label", "u1", (w,)),
        ("feat", "<f4", (fs.n_views, fs.dim)),
    ])
    records = np.empty(fs.n_items, dtype=record)
    records["id"] = fs.item_ids
    if w:
        records["label"] = fs.labels
    records["feat"] = fs.features.astype("<f4")
    _atomic_write(path, header + records.tobytes())


def _hyper_block(hyper: Hyperparams) -> bytes:
    return _HYPER_BLOCK.pack(
        hyper.alpha, hyper.tau, hyper.eta, hyper.beta, hyper.gamma,
        hyper.m, hyper.k, hyper.batch_size, hyper.max_epochs,
        hyper.lr_head, hyper.lr_codebooks, hyper.seed,
        -1 if hyper.dim is None else hyper.dim, 1 if hyper.use_bias else 0,
    )


def _parse_hyper_block(blob: bytes, offset: int) -> "tuple[Hyperparams, int]":
    vals = _HYPER_BLOCK.unpack_from(blob, offset)
    (alpha, tau, eta, beta, gamma, m, k, batch, epochs,
     lr_head, lr_code, seed, dim, use_bias) = vals
    hyper = Hyperparams(
        m=m, k=k, alpha=alpha, tau=tau, eta=eta, beta=beta, gamma=gamma,
        batch_size=batch, max_epochs=epochs, lr_head=lr_head, lr_codebooks=lr_code,
        seed=seed, dim=None if dim < 0 else int(dim), use_bias=bool(use_bias),
    )
    return hyper, offset + _HYPER_BLOCK.size


def save_parameters(path: "str | Path", hyper: Hyperparams, head: ProjectionHead,
                    books: Codebooks) -> None:
    """Snapshot hyperparams + head + codebooks with a content checksum."""
    dims = struct.pack("<IIIIIB", head.d_out, head.d_in, books.m, books.k, books.d,
                       1 if head.bias is not None else 0)
    parts = [
        _SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, FORMAT_VERSION),
        _hyper_block(hyper),
        dims,
        head.w.astype("<f8").tobytes(),
    ]
    if head.bias is not None:
        parts.append(head.bias.astype("<f8").tobytes())
    parts.append(books.weights.astype("<f8").tobytes())
    body = b"".join(parts)
    _atomic_write(path, body + hashlib.sha256(body).digest())


def load_parameters(path: "str | Path") -> "tuple[Hyperparams, ProjectionHead, Codebooks]":
    """Load a snapshot, verifying checksum and dimensional consistency."""
    blob = Path(path).read_bytes()
    if len(blob) < _SNAPSHOT_HEADER.size + 32:
        raise TruncationError(f"{path}: file shorter than a snapshot header")
    magic, version = _SNAPSHOT_HEADER.unpack_from(blob)
    if magic != SNAPSHOT_MAGIC:
        raise MagicError(f"{path}: expected magic {SNAPSHOT_MAGIC!r}, found {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported snapshot version {version}")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: snapshot checksum mismatch")
    hyper, offset = _parse_hyper_block(body, _SNAPSHOT_HEADER.size)
    d_out, d_in, m, k, d, has_bias = struct.unpack_from("<IIIIIB", body, offset)
    offset += struct.calcsize("<IIIIIB")
    if m != hyper.m or k != hyper.k or d_out != m * d:
        raise DimensionError(f"{path}: snapshot dimensions are inconsistent with its hyperparameters")
    need = d_out * d_in * 8 + (d_out * 8 if has_bias else 0) + m * k * d * 8
    if len(body) - offset != need:
        raise TruncationError(f"{path}: parameter payload has {len(body) - offset} bytes, expected {need}")
    w = np.frombuffer(body, dtype="<f8", count=d_out * d_in, offset=offset).reshape(d_out, d_in)
    offset += d_out * d_in * 8
    bias = None
    if has_bias:
        bias = np.frombuffer(body, dtype="<f8", count=d_out, offset=offset).copy()
        offset += d_out * 8
    weights = np.frombuffer(body, dtype="<f8", count=m * k * d, offset=offset).reshape(m, k, d)
    return hyper, ProjectionHead(w.copy(), bias), Codebooks(weights.copy())


def packed_code_bytes(m: int, k: int) -> int:
    """Bytes one item's code occupies on disk: ceil(m * log2(k) / 8)."""
    w = k.bit_length() - 1
    return (m * w + 7) // 8


def pack_codes(codes: np.ndarray, k: int) -> np.ndarray:
    """Pack (N, M) indices into log2(k)-bit fields, little-endian per item."""
    w = k.bit_length() - 1
    n, m = codes.shape
    bits = ((codes[:, :, None].astype(np.uint32) >> np.arange(w, dtype=np.uint32)) & 1).astype(np.uint8)
    return np.packbits(bits.reshape(n, m * w), axis=1, bitorder="little")


def unpack_codes(packed: np.ndarray, m: int, k: int) -> np.ndarray:
    """Inverse of `pack_codes`; returns (N, M) in the smallest fitting dtype."""
    w = k.bit_length() - 1
    n = packed.shape[0]
    bits = np.unpackbits(packed, axis=1, count=m * w, bitorder="little").reshape(n, m, w)
    vals = (bits.astype(np.uint32) << np.arange(w, dtype=np.uint32)).sum(axis=2)
    return vals.astype(code_dtype(k))


def save_database(path: "str | Path", db: CodeDatabase) -> None:
    """Write a code database with bit-packed codes and a checksum trailer."""
    books = db.books
    header = _DATABASE_HEADER.pack(
        DATABASE_MAGIC, FORMAT_VERSION, db.n_items, books.m, books.k, books.d,
        db.vocab, db.seed, db.hyper_hash,
    )
    parts = [
        header,
        db.item_ids.astype("<u8").tobytes(),
        db.label_sets.astype("u1").tobytes(),
        pack_codes(db.codes, books.k).tobytes(),
        books.weights.astype("<f4").tobytes(),
    ]
    body = b"".join(parts)
    _atomic_write(path, body + hashlib.sha256(body).digest())


def load_database(path: "str | Path") -> CodeDatabase:
    """Load a code database, verifying checksum and payload size."""
    blob = Path(path).read_bytes()
    if len(blob) < _DATABASE_HEADER.size + 32:
        raise TruncationError(f"{path}: file shorter than a database header")
    magic, version, n, m, k, d, vocab, seed, hyper_hash = _DATABASE_HEADER.unpack_from(blob)
    if magic != DATABASE_MAGIC:
        raise MagicError(f"{path}: expected magic {DATABASE_MAGIC!r}, found {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported database version {version}")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: database checksum mismatch")
    w = label_bytes(vocab)
    code_bytes = packed_code_bytes(m, k)
    need = _DATABASE_HEADER.size + n * (8 + w + code_bytes) + m * k * d * 4
    if len(body) != need:
        raise TruncationError(f"{path}: database payload has {len(body)} bytes, expected {need}")
    offset = _DATABASE_HEADER.size
    item_ids = np.frombuffer(body, dtype="<u8", count=n, offset=offset).copy()
    offset += n * 8
    labels = np.frombuffer(body, dtype="u1", count=n * w, offset=offset).reshape(n, w).copy()
    offset += n * w
    packed = np.frombuffer(body, dtype="u1", count=n * code_bytes, offset=offset).reshape(n, code_bytes)
    offset += n * code_bytes
    weights = np.frombuffer(body, dtype="<f4", count=m * k * d, offset=offset).reshape(m, k, d).copy()
    return CodeDatabase(
        codes=unpack_codes(packed, m, k),
        item_ids=item_ids,
        label_sets=labels,
        vocab=vocab,
        books=Codebooks(weights.astype(np.float32)),
        seed=seed,
        hyper_hash=hyper_hash,
    )


def inspect_path(path: "str | Path") -> dict:
    """Identify a file by magic and summarize its header fields."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
    if magic == FEATURE_MAGIC:
        h = peek_features(path)
        return {"kind": "features", "items": h.n, "views": h.v, "d_in": h.d_in,
                "vocab": h.vocab, "flags": h.flags}
    if magic == SNAPSHOT_MAGIC:
        hyper, head, books = load_parameters(path)
        return {"kind": "snapshot", "d_in": head.d_in, "d_out": head.d_out,
                "m": books.m, "k": books.k, "bits": hyper.bits,
                "eta": hyper.eta, "alpha": hyper.alpha, "tau": hyper.tau,
                "seed": hyper.seed}
    if magic == DATABASE_MAGIC:
        db = load_database(path)
        return {"kind": "database", "items": db.n_items, "m": db.books.m,
                "k": db.books.k, "vocab": db.vocab, "seed": db.seed,
                "code_bytes_per_item": packed_code_bytes(db.books.m, db.books.k)}
    if magic[:1] == b"{":
        from .data import Manifest

        mf = Manifest.load(path)
        return {"kind": "manifest", "name": mf.name, "r_at": mf.r_at,
                "exclude_queries": mf.exclude_queries,
                "train": str(mf.train), "query": str(mf.query), "database": str(mf.database)}
    raise MagicError(f"{path}: unrecognized file (magic {magic!r})")
