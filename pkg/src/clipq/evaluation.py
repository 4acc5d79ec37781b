"""Ranking metrics over multi-label relevance.

An item is relevant to a query when their label sets intersect.  Average
precision is computed over the top R of a ranking; the mean over queries
is taken in query-file order so repeated runs agree to the last bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Hyperparams
from .data import FeatureSet, LabelSet, require_nonempty
from .errors import EmptyDatasetError, VocabularyError
from .retrieval import CodeDatabase, query_top_k
from .trainer import ProjectionHead

DENOMINATOR_MODES = ("retrieved", "total")


def average_precision(relevance, r_at: int, denominator: str = "retrieved") -> float:
    """AP over the first `r_at` entries of a 0/1 relevance sequence.

    `denominator="retrieved"` divides by the number of relevant items that
    actually appear in the window; `"total"` divides by min(r_at, number of
    relevant items anywhere in the sequence).  Both return 0.0 when the
    window holds no relevant item.

    Deliberately a plain sequential loop: the running precision sums match
    an independent left-to-right computation exactly, with no reassociation.
    """
    if denominator not in DENOMINATOR_MODES:
        raise ValueError(f"denominator must be one of {DENOMINATOR_MODES}")
    if r_at < 1:
        raise ValueError("r_at must be >= 1")
    window = [int(bool(r)) for r in relevance[:r_at]]
    hits = 0
    precision_sum = 0.0
    for rank, rel in enumerate(window, start=1):
        if rel:
            hits += 1
            precision_sum += hits / rank
    if hits == 0:
        return 0.0
    if denominator == "retrieved":
        return precision_sum / hits
    total = sum(int(bool(r)) for r in relevance)
    return precision_sum / min(r_at, total)


def relevance_vector(query_labels: LabelSet, db: CodeDatabase, item_ids: np.ndarray) -> list:
    """0/1 relevance of each retrieved item against one query's labels."""
    if query_labels.vocab != db.vocab:
        raise VocabularyError(
            f"query vocabulary {query_labels.vocab} != database vocabulary {db.vocab}"
        )
    q = query_labels.as_int()
    out = []
    for item_id in item_ids:
        row = db.row_of(int(item_id))
        d = int.from_bytes(db.label_sets[row].tobytes(), "little")
        out.append(1 if (q & d) else 0)
    return out


@dataclass(frozen=True)
class EvalReport:
    mean_ap: float
    per_query: np.ndarray
    r_at: int
    n_queries: int
    denominator: str

    def quantiles(self) -> dict:
        qs = np.quantile(self.per_query, [0.0, 0.25, 0.5, 0.75, 1.0])
        return {
            "min": float(qs[0]),
            "p25": float(qs[1]),
            "median": float(qs[2]),
            "p75": float(qs[3]),
            "max": float(qs[4]),
        }


def mean_average_precision(
    queries: FeatureSet,
    db: CodeDatabase,
    head: ProjectionHead,
    r_at: int,
    *,
    denominator: str = "retrieved",
    exclude_self: bool = False,
) -> EvalReport:
    """Evaluate every query against the database, in query-file order.

    With `exclude_self`, a database item sharing the query's item_id is
    dropped from its ranking before AP is taken (the leave-one-out protocol
    for query sets drawn from the database itself).
    """
    require_nonempty(queries, "query set")
    if db.n_items == 0:
        raise EmptyDatasetError("database has no items")
    if queries.vocab != db.vocab:
        raise VocabularyError(
            f"query vocabulary {queries.vocab} != database vocabulary {db.vocab}"
        )
    fetch = r_at + 1 if exclude_self else r_at
    aps = np.empty(queries.n_items, dtype=np.float64)
    for row in range(queries.n_items):
        result = query_top_k(db, queries.features[row, 0], head, fetch)
        ids = result.item_ids
        if exclude_self:
            ids = ids[ids != queries.item_ids[row]][:r_at]
        rel = relevance_vector(queries.label_set(row), db, ids)
        aps[row] = average_precision(rel, r_at, denominator)
    return EvalReport(
        mean_ap=float(aps.mean()),
        per_query=aps,
        r_at=r_at,
        n_queries=queries.n_items,
        denominator=denominator,
    )


def report_document(report: EvalReport, hyper: Hyperparams, dataset: str) -> dict:
    """Reproducible evaluation record: metrics plus the settings behind them.

    Contains no timestamps or host details, so identical runs serialize to
    identical bytes.
    """
    return {
        "dataset": dataset,
        "r_at": report.r_at,
        "n_queries": report.n_queries,
        "denominator": report.denominator,
        "mean_ap": report.mean_ap,
        "ap_quantiles": report.quantiles(),
        "hyperparameters": {
            "m": hyper.m,
            "k": hyper.k,
            "bits": hyper.bits,
            "alpha": hyper.alpha,
            "tau": hyper.tau,
            "eta": hyper.eta,
            "beta": hyper.beta,
            "gamma": hyper.gamma,
            "batch_size": hyper.batch_size,
            "max_epochs": hyper.max_epochs,
            "seed": hyper.seed,
        },
    }


def write_report(path: "str | Path", doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
