"""In-memory containers for feature sets, label sets and dataset manifests."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, EmptyDatasetError, NonFiniteError, VocabularyError


def label_bytes(vocab: int) -> int:
    """Number of bytes needed to hold one bitset over `vocab` categories."""
    return (vocab + 7) // 8


def pack_labels(masks: "list[int] | np.ndarray", vocab: int) -> np.ndarray:
    """Pack per-item label masks into an (N, ceil(vocab/8)) uint8 matrix.

    Accepts either a list of integer bitmasks (bit i = category i) or a
    boolean (N, vocab) membership matrix.  Bit order is little-endian:
    category i lives in byte i // 8, bit i % 8.
    """
    if isinstance(masks, np.ndarray) and masks.ndim == 2:
        bools = masks.astype(bool)
        if bools.shape[1] != vocab:
            raise VocabularyError(f"label matrix has {bools.shape[1]} columns, vocabulary is {vocab}")
    else:
        bools = np.zeros((len(masks), vocab), dtype=bool)
        for row, mask in enumerate(masks):
            if mask >> vocab:
                raise VocabularyError(f"label mask {mask:#x} has bits beyond vocabulary {vocab}")
            for i in range(vocab):
                if mask >> i & 1:
                    bools[row, i] = True
    if vocab == 0:
        return np.zeros((len(bools), 0), dtype=np.uint8)
    return np.packbits(bools, axis=1, bitorder="little")


@dataclass(frozen=True)
class LabelSet:
    """Bitset over a dataset's category vocabulary."""

    vocab: int
    bits: np.ndarray  # uint8, length ceil(vocab/8)

    def __post_init__(self):
        expected = label_bytes(self.vocab)
        if self.bits.shape != (expected,):
            raise VocabularyError(f"bitset has {self.bits.shape[0]} bytes, vocabulary {self.vocab} needs {expected}")

    def as_int(self) -> int:
        return int.from_bytes(self.bits.tobytes(), "little")


def is_relevant(q: LabelSet, d: LabelSet) -> bool:
    """True iff the two label sets share at least one category."""
    if q.vocab != d.vocab:
        raise VocabularyError(f"vocabulary mismatch: {q.vocab} vs {d.vocab}")
    return bool(np.any(q.bits & d.bits))


@dataclass
class FeatureSet:
    """N items, V views each, of D_in-dimensional feature vectors with labels.

    `features` has shape (N, V, D_in) float32; `labels` is the packed bitset
    matrix (N, ceil(vocab/8)) uint8; `item_ids` is (N,) uint64.
    """

    item_ids: np.ndarray
    labels: np.ndarray
    features: np.ndarray
    vocab: int
    flags: int = 0

    def __post_init__(self):
        if self.features.ndim != 3:
            raise DimensionError(f"features must be (N, V, D_in), got shape {self.features.shape}")
        n = self.features.shape[0]
        if self.item_ids.shape != (n,):
            raise DimensionError("item_ids length does not match feature rows")
        if self.labels.shape != (n, label_bytes(self.vocab)):
            raise DimensionError("label matrix does not match item count / vocabulary")
        if not np.isfinite(self.features).all():
            raise NonFiniteError("feature set contains non-finite values")

    @property
    def n_items(self) -> int:
        return self.features.shape[0]

    @property
    def n_views(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    def label_set(self, row: int) -> LabelSet:
        return LabelSet(self.vocab, self.labels[row])


@dataclass
class Manifest:
    """Dataset manifest: feature file paths plus the evaluation protocol."""

    name: str
    train: Path
    query: Path
    database: Path
    r_at: int
    exclude_queries: bool = False
    vocabulary: list[str] = field(default_factory=list)

    @classmethod
    def load(cls, path: "str | Path") -> "Manifest":
        path = Path(path)
        raw = json.loads(path.read_text())
        required = {"name", "train", "query", "database", "r_at"}
        missing = required - raw.keys()
        if missing:
            raise KeyError(f"manifest {path} missing keys: {sorted(missing)}")
        base = path.parent
        return cls(
            name=str(raw["name"]),
            train=base / raw["train"],
            query=base / raw["query"],
            database=base / raw["database"],
            r_at=int(raw["r_at"]),
            exclude_queries=bool(raw.get("exclude_queries", False)),
            vocabulary=list(raw.get("vocabulary", [])),
        )

    def save(self, path: "str | Path") -> None:
        path = Path(path)
        base = path.parent
        doc = {
            "name": self.name,
            "train": str(Path(self.train).relative_to(base) if Path(self.train).is_relative_to(base) else self.train),
            "query": str(Path(self.query).relative_to(base) if Path(self.query).is_relative_to(base) else self.query),
            "database": str(
                Path(self.database).relative_to(base) if Path(self.database).is_relative_to(base) else self.database
            ),
            "r_at": self.r_at,
            "exclude_queries": self.exclude_queries,
            "vocabulary": self.vocabulary,
        }
        path.write_text(json.dumps(doc, indent=2) + "\n")

    def validate_files(self) -> None:
        """Check the referenced feature files exist and agree on D_in / vocabulary."""
        from .store import peek_features  # local import to avoid a cycle

        headers = {}
        for role in ("train", "query", "database"):
            p = Path(getattr(self, role))
            if not p.is_file():
                raise FileNotFoundError(f"manifest references missing {role} file: {p}")
            headers[role] = peek_features(p)
        dims = {h.d_in for h in headers.values()}
        vocabs = {h.vocab for h in headers.values()}
        if len(dims) != 1:
            raise DimensionError(f"manifest files disagree on D_in: { {k: v.d_in for k, v in headers.items()} }")
        if len(vocabs) != 1:
            raise VocabularyError(f"manifest files disagree on vocabulary: { {k: v.vocab for k, v in headers.items()} }")
        if self.r_at < 1:
            raise ValueError("manifest r_at must be >= 1")


def require_nonempty(fs: FeatureSet, what: str = "feature set") -> None:
    if fs.n_items == 0:
        raise EmptyDatasetError(f"{what} has no items")
