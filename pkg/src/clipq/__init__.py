"""Compact-code retrieval with trainable product quantization.

Features are projected, L2-normalized and quantized into M codebook indices;
search scans the code table with a per-query lookup table.  Training uses a
contrastive objective whose hardest negatives can be clipped per query.
"""

from .config import Hyperparams, RunConfig
from .data import FeatureSet, LabelSet, Manifest
from .errors import EngineError
from .evaluation import average_precision, mean_average_precision
from .objective import clipped_loss, total_objective, vanilla_loss
from .quantizer import Codebooks, hard_quantize, soft_quantize
from .retrieval import CodeDatabase, build_database, query_top_k
from .store import load_database, load_parameters, read_features, save_database, save_parameters, write_features
from .trainer import ProjectionHead, TrainReport, fit

__all__ = [
    "Codebooks",
    "CodeDatabase",
    "EngineError",
    "FeatureSet",
    "Hyperparams",
    "LabelSet",
    "Manifest",
    "ProjectionHead",
    "RunConfig",
    "TrainReport",
    "average_precision",
    "build_database",
    "clipped_loss",
    "fit",
    "hard_quantize",
    "load_database",
    "load_parameters",
    "mean_average_precision",
    "query_top_k",
    "read_features",
    "save_database",
    "save_parameters",
    "soft_quantize",
    "total_objective",
    "vanilla_loss",
    "write_features",
]

__version__ = "1.0.0"
