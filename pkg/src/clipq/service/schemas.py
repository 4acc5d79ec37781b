"""Request and response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HyperOverrides(BaseModel):
    """Optional hyperparameter overrides; unset fields keep engine defaults."""

    bits: "int | None" = Field(default=None, ge=1)
    codewords: "int | None" = Field(default=None, ge=2)
    dim: "int | None" = Field(default=None, ge=1)
    eta: "int | None" = Field(default=None, ge=0)
    tau: "float | None" = Field(default=None, gt=0)
    alpha: "float | None" = Field(default=None, gt=0)
    beta: "float | None" = None
    gamma: "float | None" = None
    batch: "int | None" = Field(default=None, ge=4)
    epochs: "int | None" = Field(default=None, ge=0)
    seed: "int | None" = None


class TrainRequest(BaseModel):
    manifest: str
    out: str
    hyper: HyperOverrides = HyperOverrides()


class EpochLoss(BaseModel):
    total: float
    contrastive: float
    weight_decay: float
    codeword_reg: float


class TrainResponse(BaseModel):
    snapshot: str
    epochs_run: int
    best_epoch: int
    final_loss: EpochLoss


class BuildRequest(BaseModel):
    manifest: str
    snapshot: str
    out: str


class BuildResponse(BaseModel):
    database: str
    items: int
    code_bytes_per_item: int


class QueryRequest(BaseModel):
    snapshot: str
    database: str
    vector: "list[float]"
    k: int = Field(default=10, ge=1)


class Hit(BaseModel):
    rank: int
    item_id: int
    score: float


class QueryResponse(BaseModel):
    hits: "list[Hit]"


class EvalRequest(BaseModel):
    manifest: str
    snapshot: str
    database: str
    r_at: "int | None" = Field(default=None, ge=1)
    denominator: str = "retrieved"


class EvalResponse(BaseModel):
    dataset: str
    r_at: int
    n_queries: int
    mean_ap: float
    ap_quantiles: "dict[str, float]"


class InspectResponse(BaseModel):
    kind: str
    fields: dict


class SyntheticRequest(BaseModel):
    out: str
    clusters: int = Field(default=10, ge=2)
    per_cluster: int = Field(default=200, ge=1)
    queries_per_cluster: int = Field(default=20, ge=1)
    dim: int = Field(default=64, ge=2)
    duplicate_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    seed: int = 0


class SyntheticResponse(BaseModel):
    manifest: str
    items: int
    queries: int
