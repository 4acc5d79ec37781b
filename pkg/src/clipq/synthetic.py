"""Synthetic clustered datasets for tests and demos.

Items are Gaussian blobs around random unit-norm centers, labeled by their
cluster.  Training views use feature-space augmentation (noise + coordinate
dropout), a stand-in for extractor-side image augmentation.  The duplicate
option overwrites a slice of items with near-copies of items from *other*
clusters while keeping the victim's label, planting high-similarity pairs
whose labels disagree.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import FeatureSet, Manifest, pack_labels
from .store import write_features

AUGMENT_NOISE = 0.05
AUGMENT_DROPOUT = 0.1

QUERY_ID_BASE = 1_000_000


@dataclass(frozen=True)
class ClusterSpec:
    clusters: int = 10
    d_in: int = 64
    per_cluster: int = 200
    queries_per_cluster: int = 20
    center_scale: float = 1.0
    spread: float = 0.08
    duplicate_fraction: float = 0.0
    duplicate_spread: float = 0.02
    seed: int = 0

    @property
    def vocab(self) -> int:
        return self.clusters

    @property
    def n_items(self) -> int:
        return self.clusters * self.per_cluster

    @property
    def n_queries(self) -> int:
        return self.clusters * self.queries_per_cluster


def augment_views(base: np.ndarray, n_views: int, rng: np.random.Generator,
                  noise: float = AUGMENT_NOISE, dropout: float = AUGMENT_DROPOUT) -> np.ndarray:
    """Independent augmented views of each row: add noise, zero coordinates."""
    n, d = base.shape
    views = base[:, None, :] + rng.normal(0.0, noise, size=(n, n_views, d))
    keep = rng.random(size=(n, n_views, d)) >= dropout
    return (views * keep).astype(np.float32)


def _one_hot_labels(cluster_of: np.ndarray, vocab: int) -> np.ndarray:
    masks = np.zeros((cluster_of.size, vocab), dtype=bool)
    masks[np.arange(cluster_of.size), cluster_of] = True
    return pack_labels(masks, vocab)


@dataclass(frozen=True)
class ClusterData:
    train: FeatureSet
    query: FeatureSet
    database: FeatureSet
    cluster_of: np.ndarray
    duplicate_rows: np.ndarray


def make_clusters(spec: ClusterSpec) -> ClusterData:
    """Draw the dataset. One RNG, fixed draw order, so output is a pure
    function of the spec."""
    rng = np.random.default_rng(spec.seed)
    centers = rng.normal(size=(spec.clusters, spec.d_in))
    centers *= spec.center_scale / np.linalg.norm(centers, axis=1, keepdims=True)

    cluster_of = np.repeat(np.arange(spec.clusters), spec.per_cluster)
    base = centers[cluster_of] + rng.normal(0.0, spec.spread, size=(spec.n_items, spec.d_in))

    q_cluster = np.repeat(np.arange(spec.clusters), spec.queries_per_cluster)
    q_base = centers[q_cluster] + rng.normal(0.0, spec.spread, size=(spec.n_queries, spec.d_in))

    n_dup = int(round(spec.duplicate_fraction * spec.n_items))
    dup_rows = np.empty(0, dtype=np.int64)
    if n_dup:
        victims = rng.choice(spec.n_items, size=n_dup, replace=False)
        # a source from a different cluster than the victim keeps its label
        shift = rng.integers(1, spec.clusters, size=n_dup)
        src_cluster = (cluster_of[victims] + shift) % spec.clusters
        src = src_cluster * spec.per_cluster + rng.integers(0, spec.per_cluster, size=n_dup)
        base[victims] = base[src] + rng.normal(0.0, spec.duplicate_spread,
                                               size=(n_dup, spec.d_in))
        dup_rows = np.sort(victims)

    train_views = augment_views(base, 2, rng)

    ids = np.arange(spec.n_items, dtype=np.uint64)
    labels = _one_hot_labels(cluster_of, spec.vocab)
    q_ids = np.arange(QUERY_ID_BASE, QUERY_ID_BASE + spec.n_queries, dtype=np.uint64)
    q_labels = _one_hot_labels(q_cluster, spec.vocab)

    train = FeatureSet(item_ids=ids, labels=labels, features=train_views, vocab=spec.vocab)
    database = FeatureSet(item_ids=ids.copy(), labels=labels.copy(),
                          features=base[:, None, :].astype(np.float32), vocab=spec.vocab)
    query = FeatureSet(item_ids=q_ids, labels=q_labels,
                       features=q_base[:, None, :].astype(np.float32), vocab=spec.vocab)
    return ClusterData(train=train, query=query, database=database,
                       cluster_of=cluster_of, duplicate_rows=dup_rows)


def write_dataset(directory: "str | Path", spec: ClusterSpec, *, name: str = "synthetic",
                  r_at: int = 100) -> Manifest:
    """Materialize train/query/database files plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = make_clusters(spec)
    paths = {
        "train": directory / "train.features",
        "query": directory / "query.features",
        "database": directory / "database.features",
    }
    write_features(paths["train"], data.train)
    write_features(paths["query"], data.query)
    write_features(paths["database"], data.database)
    manifest = Manifest(
        name=name,
        train=paths["train"],
        query=paths["query"],
        database=paths["database"],
        r_at=r_at,
        exclude_queries=False,
        vocabulary=[f"cluster-{i}" for i in range(spec.clusters)],
    )
    manifest.save(directory / "manifest.json")
    return manifest
