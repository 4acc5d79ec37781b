"""Hard-coded database construction and lookup-table retrieval.

Queries stay in full precision; database items are M codeword indices.
A per-query M x K table of segment-codeword scores turns each item's
similarity into an M-term table sum (asymmetric quantized similarity).
Scoring runs in float32; the scan walks the code matrix in contiguous
blocks so the table stays cache-resident.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureSet, require_nonempty
from .errors import DimensionError, EmptyDatasetError, NonFiniteError
from .quantizer import Codebooks, segment_dots
from .trainer import ProjectionHead, project_batch

SCAN_BLOCK = 1 << 16  # code rows per scan block

THREADS_ENV = "CLIPQ_THREADS"


@dataclass
class CodeDatabase:
    """N items as M-wide codeword indices, plus ids, labels and build context."""

    codes: np.ndarray  # (N, M) uint8/uint16
    item_ids: np.ndarray  # (N,) uint64
    label_sets: np.ndarray  # (N, ceil(vocab/8)) uint8
    vocab: int
    books: Codebooks  # codebooks snapshot from build time (float32 weights)
    seed: int = 0
    hyper_hash: bytes = b"\x00" * 32
    _id_rows: "dict[int, int] | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = self.codes.shape[0]
        if self.codes.ndim != 2 or self.codes.shape[1] != self.books.m:
            raise DimensionError(f"codes shape {self.codes.shape} does not match M={self.books.m}")
        if self.item_ids.shape != (n,) or self.label_sets.shape[0] != n:
            raise DimensionError("ids/labels do not match code row count")
        if self.codes.size and int(self.codes.max()) >= self.books.k:
            raise DimensionError(f"code entry {int(self.codes.max())} out of range for K={self.books.k}")

    @property
    def n_items(self) -> int:
        return self.codes.shape[0]

    def row_of(self, item_id: int) -> int:
        if self._id_rows is None:
            self._id_rows = {int(v): i for i, v in enumerate(self.item_ids)}
        return self._id_rows[int(item_id)]

    def content_digest(self) -> bytes:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.codes).tobytes())
        h.update(np.ascontiguousarray(self.item_ids).tobytes())
        h.update(np.ascontiguousarray(self.label_sets).tobytes())
        h.update(np.ascontiguousarray(self.books.weights).tobytes())
        return h.digest()


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked ids with descending scores; ties broken by ascending id."""

    item_ids: np.ndarray
    scores: np.ndarray
    k_requested: int


def code_dtype(k: int) -> np.dtype:
    return np.dtype(np.uint8) if k <= 256 else np.dtype(np.uint16)


def build_database(features: FeatureSet, head: ProjectionHead, books: Codebooks,
                   seed: int = 0, hyper_hash: bytes = b"\x00" * 32) -> CodeDatabase:
    """Hard-quantize every item's view-0 feature into its code row.

    Projection and argmax run in float64; only the stored codebook snapshot
    and the scan are float32.
    """
    require_nonempty(features, "database split")
    z, _, _ = project_batch(features.features[:, 0, :].astype(np.float64), head)
    if z.shape[1] != books.dim:
        raise DimensionError(f"projected dim {z.shape[1]} does not match codebooks dim {books.dim}")
    seg = z.reshape(-1, books.m, books.d)
    scores = segment_dots(seg, np.asarray(books.weights, dtype=np.float64))
    codes = scores.argmax(axis=2)
    return CodeDatabase(
        codes=codes.astype(code_dtype(books.k)),
        item_ids=features.item_ids.copy(),
        label_sets=features.labels.copy(),
        vocab=features.vocab,
        books=Codebooks(books.weights.astype(np.float32)),
        seed=seed,
        hyper_hash=hyper_hash,
    )


def build_lookup_table(query_raw: np.ndarray, head: ProjectionHead, books: Codebooks) -> np.ndarray:
    """Per-query (M, K) float32 table: scores[m][i] = z_q^m . c^m_i."""
    z, _, _ = project_batch(np.asarray(query_raw, dtype=np.float64), head)
    if z.shape[1] != books.dim:
        raise DimensionError(f"projected dim {z.shape[1]} does not match codebooks dim {books.dim}")
    zseg = z[0].reshape(books.m, 1, books.d)
    # entries are float64 dot products rounded once to float32, so the table
    # does not depend on any particular accumulation order
    lut = np.matmul(np.asarray(books.weights, dtype=np.float64),
                    zseg.transpose(0, 2, 1))[:, :, 0].astype(np.float32)
    if not np.isfinite(lut).all():
        raise NonFiniteError("lookup table contains non-finite scores")
    return lut


def asymmetric_score(lut: np.ndarray, code: np.ndarray) -> float:
    """Sum of table entries selected by the code: sum_m lut[m][code[m]]."""
    lut = np.asarray(lut, dtype=np.float32)
    code = np.asarray(code)
    m, k = lut.shape
    if code.shape != (m,):
        raise DimensionError(f"code width {code.shape} does not match table M={m}")
    if (code < 0).any() or (code >= k).any():
        raise IndexError(f"code index out of range for K={k}")
    total = np.float32(0.0)
    for seg in range(m):
        total += lut[seg, code[seg]]
    return float(total)


def _scan_block(lut: np.ndarray, codes: np.ndarray) -> np.ndarray:
    scores = np.zeros(codes.shape[0], dtype=np.float32)
    for seg in range(lut.shape[0]):
        scores += lut[seg][codes[:, seg]]
    return scores


def scan_scores(lut: np.ndarray, codes: np.ndarray, threads: "int | None" = None) -> np.ndarray:
    """Asymmetric scores of every code row, block-wise; float32 throughout.

    `threads` > 1 partitions the rows across a pool; the merge is by block
    order, so the result is identical for any thread count.
    """
    lut = np.asarray(lut, dtype=np.float32)
    n = codes.shape[0]
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or "1")
    blocks = [(s, min(s + SCAN_BLOCK, n)) for s in range(0, n, SCAN_BLOCK)]
    if threads <= 1 or len(blocks) <= 1:
        out = np.empty(n, dtype=np.float32)
        for s, e in blocks:
            out[s:e] = _scan_block(lut, codes[s:e])
        return out
    out = np.empty(n, dtype=np.float32)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [(s, e, pool.submit(_scan_block, lut, codes[s:e])) for s, e in blocks]
        for s, e, fut in futures:
            out[s:e] = fut.result()
    return out


def rank_scores(scores: np.ndarray, item_ids: np.ndarray, k: int) -> "tuple[np.ndarray, np.ndarray]":
    """Top-k order: descending score, then ascending item id."""
    order = np.lexsort((item_ids, -scores.astype(np.float64)))
    top = order[: min(k, len(order))]
    return item_ids[top], scores[top]


def query_top_k(db: CodeDatabase, query_raw: np.ndarray, head: ProjectionHead,
                k: int) -> RetrievalResult:
    """Score every database code against the query's table; return top-k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if db.n_items == 0:
        raise EmptyDatasetError("cannot query an empty database")
    lut = build_lookup_table(query_raw, head, db.books)
    scores = scan_scores(lut, db.codes)
    ids, top_scores = rank_scores(scores, db.item_ids, k)
    return RetrievalResult(item_ids=ids, scores=top_scores, k_requested=k)
