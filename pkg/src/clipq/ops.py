"""Pipeline operations shared by the command line and the HTTP service.

Each function takes a RunConfig, resolves default artifact paths under the
output directory, and returns plain data the caller can print or serialize.
Artifact names are fixed so a train / build / eval sequence composes without
extra flags.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import Hyperparams, RunConfig
from .data import FeatureSet, Manifest
from .evaluation import mean_average_precision, report_document, write_report
from .retrieval import CodeDatabase, build_database, query_top_k
from .store import (
    inspect_path,
    load_database,
    load_parameters,
    read_features,
    save_database,
    save_parameters,
)
from .trainer import ProjectionHead, TrainReport, fit

SNAPSHOT_NAME = "model.snapshot"
DATABASE_NAME = "codes.db"
METRICS_NAME = "metrics.json"
REPORT_NAME = "train_report.json"
RESULTS_NAME = "results.tsv"


def _require_manifest(run: RunConfig) -> Manifest:
    if run.manifest is None:
        raise ValueError("a manifest path is required for this operation")
    manifest = Manifest.load(run.manifest)
    manifest.validate_files()
    return manifest


def snapshot_path(run: RunConfig) -> Path:
    return Path(run.snapshot) if run.snapshot else Path(run.out) / SNAPSHOT_NAME


def database_path(run: RunConfig) -> Path:
    return Path(run.database) if run.database else Path(run.out) / DATABASE_NAME


def stderr_progress(epoch: int, entry, elapsed: float) -> None:
    print(
        f"epoch {epoch:3d}  total {entry.total:.4f}  contrastive {entry.contrastive:.4f}"
        f"  decay {entry.weight_decay:.6f}  reg {entry.codeword_reg:.6f}  {elapsed:.1f}s",
        file=sys.stderr,
        flush=True,
    )


def run_train(run: RunConfig, *, progress=None) -> "tuple[Path, TrainReport]":
    """Fit on the manifest's train split and write the parameter snapshot."""
    run.validate()
    manifest = _require_manifest(run)
    features = read_features(manifest.train)
    head, books, report = fit(features, run.hyper, progress=progress)
    out = snapshot_path(run)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_parameters(out, run.hyper, head, books)
    report = replace(report, snapshot_path=out)
    report_doc = {
        "epochs_run": len(report.history),
        "best_epoch": report.best_epoch,
        "wall_seconds": round(report.wall_seconds, 3),
        "history": [
            {
                "total": h.total,
                "contrastive": h.contrastive,
                "weight_decay": h.weight_decay,
                "codeword_reg": h.codeword_reg,
            }
            for h in report.history
        ],
    }
    (Path(run.out) / REPORT_NAME).parent.mkdir(parents=True, exist_ok=True)
    (Path(run.out) / REPORT_NAME).write_text(json.dumps(report_doc, indent=2) + "\n")
    return out, report


def run_build(run: RunConfig) -> Path:
    """Encode the manifest's database split using a trained snapshot."""
    manifest = _require_manifest(run)
    hyper, head, books = load_parameters(snapshot_path(run))
    features = read_features(manifest.database)
    db = build_from_parts(features, hyper, head, books)
    out = database_path(run)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_database(out, db)
    return out


def build_from_parts(features: FeatureSet, hyper: Hyperparams, head: ProjectionHead,
                     books) -> CodeDatabase:
    return build_database(features, head, books, seed=hyper.seed,
                          hyper_hash=hyper.content_hash())


def run_query(run: RunConfig, queries: "Path | None" = None, k: int = 10,
              out: "Path | None" = None) -> "list[tuple]":
    """Rank the database for every query row; optionally write a TSV.

    Rows are (query_id, rank, item_id, score) in query-file order.
    """
    _, head, _ = load_parameters(snapshot_path(run))
    db = load_database(database_path(run))
    if queries is None:
        manifest = _require_manifest(run)
        queries = manifest.query
    qset = read_features(queries)
    rows = []
    for i in range(qset.n_items):
        result = query_top_k(db, qset.features[i, 0], head, k)
        qid = int(qset.item_ids[i])
        for rank, (item_id, score) in enumerate(zip(result.item_ids, result.scores), start=1):
            rows.append((qid, rank, int(item_id), float(score)))
    if out is not None:
        lines = ["query_id\trank\titem_id\tscore"]
        lines += [f"{q}\t{r}\t{i}\t{s:.6f}" for q, r, i, s in rows]
        Path(out).write_text("\n".join(lines) + "\n")
    return rows


def run_eval(run: RunConfig, r_at: "int | None" = None,
             denominator: str = "retrieved") -> dict:
    """Evaluate mAP@R for the manifest's query split; writes metrics JSON."""
    manifest = _require_manifest(run)
    hyper, head, _ = load_parameters(snapshot_path(run))
    db = load_database(database_path(run))
    qset = read_features(manifest.query)
    report = mean_average_precision(
        qset, db, head,
        r_at if r_at is not None else manifest.r_at,
        denominator=denominator,
        exclude_self=manifest.exclude_queries,
    )
    doc = report_document(report, hyper, manifest.name)
    out = Path(run.out) / METRICS_NAME
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report(out, doc)
    return doc


def run_sweep(run: RunConfig, etas: "list[int]", r_at: "int | None" = None,
              progress=None) -> "list[dict]":
    """Retrain per clipping setting and evaluate each: one result row per eta.

    Everything except eta is held fixed, including the seed, so rows are
    directly comparable.
    """
    rows = []
    for eta in etas:
        sub = replace(
            run,
            hyper=replace(run.hyper, eta=eta),
            out=Path(run.out) / f"eta-{eta}",
            snapshot=None,
            database=None,
        )
        sub.out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        run_train(sub, progress=progress)
        run_build(sub)
        doc = run_eval(sub, r_at=r_at)
        rows.append({
            "eta": eta,
            "mean_ap": doc["mean_ap"],
            "r_at": doc["r_at"],
            "seconds": round(time.perf_counter() - t0, 1),
        })
    return rows


def run_inspect(path: "str | Path") -> dict:
    return inspect_path(path)


def as_table(rows: "list[dict]", columns: "list[str]") -> str:
    """Fixed-width text table; used for sweep output."""
    widths = [max(len(c), *(len(str(r[c])) for r in rows)) if rows else len(c) for c in columns]
    header = "  ".join(c.ljust(w) for c, w in zip(columns, widths))
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append("  ".join(str(r[c]).ljust(w) for c, w in zip(columns, widths)))
    return "\n".join(lines)
