"""Extraction jobs: one image folder in, one feature file out.

Training items get `2 * pairs` independently augmented views; consecutive
views form the contrastive pairs, so `pairs` above 1 pre-materializes extra
epochs' worth of them.  Database and query items get the single center
view.  Views are batched through the backbone, and the writer sees only the
finished arrays, so a failed job never leaves a partial file behind.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backbones import load_backbone
from .featurefile import file_size, write_features
from .folders import load_image, scan_folder
from .views import DEFAULT_RECIPE, Recipe, as_array, augment_view, center_view, view_rng

SPLITS = ("train", "database", "query")


@dataclass(frozen=True)
class ExtractionJob:
    dataset: Path
    split: str
    out: Path
    seed: int = 0
    backbone: str = "pixel-proj"
    dim: "int | None" = None
    pairs: int = 1
    weights: "Path | None" = None
    recipe: Recipe = DEFAULT_RECIPE
    batch_views: int = 256

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.pairs < 1:
            raise ValueError("pairs must be at least 1")
        if self.batch_views < 1:
            raise ValueError("batch_views must be at least 1")


@dataclass(frozen=True)
class ExtractionSummary:
    out: Path
    items: int
    views: int
    d_in: int
    vocab: int
    file_bytes: int


def run_extraction(job: ExtractionJob) -> ExtractionSummary:
    folder = scan_folder(job.dataset)
    backbone = load_backbone(job.backbone, dim=job.dim, weights=job.weights)
    size = backbone.input_size
    n = len(folder.entries)
    v = 2 * job.pairs if job.split == "train" else 1

    feats = np.empty((n, v, backbone.d_out), dtype=np.float32)
    pixels = np.empty((min(job.batch_views, n * v), size, size, 3), dtype=np.float32)
    slots: "list[tuple[int, int]]" = []

    def flush():
        if not slots:
            return
        embedded = backbone.embed(pixels[:len(slots)])
        for row, (item, view) in enumerate(slots):
            feats[item, view] = embedded[row]
        slots.clear()

    for item, entry in enumerate(folder.entries):
        img = load_image(entry.path)
        for view in range(v):
            if job.split == "train":
                rng = view_rng(job.seed, entry.item_id, view)
                pixels[len(slots)] = as_array(augment_view(img, rng, size, job.recipe))
            else:
                pixels[len(slots)] = as_array(center_view(img, size))
            slots.append((item, view))
            if len(slots) == len(pixels):
                flush()
    flush()

    ids = [entry.item_id for entry in folder.entries]
    categories = [entry.category for entry in folder.entries]
    out = write_features(job.out, ids, categories, feats, folder.vocab)
    return ExtractionSummary(
        out=out, items=n, views=v, d_in=backbone.d_out, vocab=folder.vocab,
        file_bytes=file_size(n, v, backbone.d_out, folder.vocab),
    )
