"""HTTP front end over the pipeline operations.

Training and building run synchronously inside the request at this scale.
Loaded snapshots and databases are cached by path and modification time, so
repeated queries against the same artifacts skip the disk.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query

from ..config import RunConfig
from ..errors import EngineError, FormatError
from ..retrieval import query_top_k
from ..store import inspect_path, load_database, load_parameters
from .. import ops
from . import schemas


class _ArtifactCache:
    """Path + mtime keyed cache for snapshots and databases."""

    def __init__(self) -> None:
        self._entries: dict = {}

    def _get(self, path: str, loader):
        key = (loader.__name__, path)
        mtime = os.stat(path).st_mtime_ns
        hit = self._entries.get(key)
        if hit is not None and hit[0] == mtime:
            return hit[1]
        value = loader(path)
        self._entries[key] = (mtime, value)
        return value

    def parameters(self, path: str):
        return self._get(path, load_parameters)

    def database(self, path: str):
        return self._get(path, load_database)


app = FastAPI(title="clipq", version="1.0.0")
_cache = _ArtifactCache()


@app.exception_handler(EngineError)
async def _engine_error(request, exc: EngineError):
    from fastapi.responses import JSONResponse

    status = 422 if isinstance(exc, FormatError) else 400
    return JSONResponse(status_code=status, content={"detail": str(exc)})


@app.exception_handler(ValueError)
async def _value_error(request, exc: ValueError):
    # hyperparameter validation (body schemas raise RequestValidationError,
    # which FastAPI maps to 422 before this handler can see it)
    from fastapi.responses import JSONResponse

    return JSONResponse(status_code=400, content={"detail": str(exc)})


def _missing(path: str) -> HTTPException:
    return HTTPException(status_code=404, detail=f"no such file: {path}")


def _run_config(req: "schemas.TrainRequest | schemas.BuildRequest | schemas.EvalRequest") -> RunConfig:
    run = RunConfig()
    hyper = getattr(req, "hyper", None)
    if hyper is not None:
        fields = hyper.model_dump(exclude_none=True)
        # codebook size before bits; batch/epochs map to their long names
        renames = {"codewords": "k", "batch": "batch_size", "epochs": "max_epochs"}
        ordered = sorted(fields.items(), key=lambda kv: kv[0] != "codewords")
        for name, value in ordered:
            run = run.with_overrides(**{renames.get(name, name): value})
    paths = {}
    for attr in ("manifest", "out", "snapshot", "database"):
        if hasattr(req, attr):
            paths[attr] = getattr(req, attr)
    if isinstance(req, schemas.BuildRequest):
        paths["database"] = str(Path(req.out) / ops.DATABASE_NAME)
        paths["out"] = req.out
    run = run.with_overrides(**paths)
    run.validate()
    return run


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/datasets/synthetic", response_model=schemas.SyntheticResponse)
def make_synthetic(req: schemas.SyntheticRequest) -> schemas.SyntheticResponse:
    from ..synthetic import ClusterSpec, write_dataset

    spec = ClusterSpec(clusters=req.clusters, per_cluster=req.per_cluster,
                       queries_per_cluster=req.queries_per_cluster, d_in=req.dim,
                       duplicate_fraction=req.duplicate_fraction, seed=req.seed)
    write_dataset(req.out, spec)
    return schemas.SyntheticResponse(
        manifest=str(Path(req.out) / "manifest.json"),
        items=spec.n_items,
        queries=spec.n_queries,
    )


@app.post("/train", response_model=schemas.TrainResponse)
def train(req: schemas.TrainRequest) -> schemas.TrainResponse:
    if not Path(req.manifest).exists():
        raise _missing(req.manifest)
    run = _run_config(req)
    path, report = ops.run_train(run)
    last = report.history[-1]
    return schemas.TrainResponse(
        snapshot=str(path),
        epochs_run=len(report.history),
        best_epoch=report.best_epoch,
        final_loss=schemas.EpochLoss(
            total=last.total, contrastive=last.contrastive,
            weight_decay=last.weight_decay, codeword_reg=last.codeword_reg,
        ),
    )


@app.post("/build", response_model=schemas.BuildResponse)
def build(req: schemas.BuildRequest) -> schemas.BuildResponse:
    for p in (req.manifest, req.snapshot):
        if not Path(p).exists():
            raise _missing(p)
    run = _run_config(req)
    path = ops.run_build(run)
    db = _cache.database(str(path))
    from ..store import packed_code_bytes

    return schemas.BuildResponse(
        database=str(path),
        items=db.n_items,
        code_bytes_per_item=packed_code_bytes(db.books.m, db.books.k),
    )


@app.post("/query", response_model=schemas.QueryResponse)
def query(req: schemas.QueryRequest) -> schemas.QueryResponse:
    for p in (req.snapshot, req.database):
        if not Path(p).exists():
            raise _missing(p)
    _, head, _ = _cache.parameters(req.snapshot)
    db = _cache.database(req.database)
    result = query_top_k(db, np.asarray(req.vector, dtype=np.float64), head, req.k)
    hits = [
        schemas.Hit(rank=r, item_id=int(i), score=float(s))
        for r, (i, s) in enumerate(zip(result.item_ids, result.scores), start=1)
    ]
    return schemas.QueryResponse(hits=hits)


@app.post("/evaluate", response_model=schemas.EvalResponse)
def evaluate(req: schemas.EvalRequest) -> schemas.EvalResponse:
    for p in (req.manifest, req.snapshot, req.database):
        if not Path(p).exists():
            raise _missing(p)
    run = _run_config(req).with_overrides(out=str(Path(req.database).parent))
    doc = ops.run_eval(run, r_at=req.r_at, denominator=req.denominator)
    return schemas.EvalResponse(
        dataset=doc["dataset"], r_at=doc["r_at"], n_queries=doc["n_queries"],
        mean_ap=doc["mean_ap"], ap_quantiles=doc["ap_quantiles"],
    )


@app.get("/inspect", response_model=schemas.InspectResponse)
def inspect(path: str = Query(...)) -> schemas.InspectResponse:
    if not Path(path).exists():
        raise _missing(path)
    info = inspect_path(path)
    kind = info.pop("kind")
    return schemas.InspectResponse(kind=kind, fields=info)
