"""Contrastive losses over a batch of soft-quantized reconstructions.

A batch holds 2*N_B rows ordered [view A of item 1..N_B, view B of item
1..N_B]; the positive key of row q is row (q + N_B) mod 2N_B.  The clipped
variant sorts each query's negative similarity scores ascending and drops
the eta largest before forming the denominator, so likely false negatives
stop contributing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BatchTooSmallError,
    ClippingExhaustedError,
    NonFiniteError,
    ZeroNormError,
)
from .quantizer import Codebooks


@dataclass(frozen=True)
class LossBreakdown:
    """Objective components; total = contrastive + beta*wd + gamma*reg."""

    contrastive: float
    weight_decay: float
    codeword_reg: float
    total: float

    @classmethod
    def assemble(cls, contrastive: float, weight_decay: float, codeword_reg: float,
                 beta: float, gamma: float) -> "LossBreakdown":
        total = contrastive + beta * weight_decay + gamma * codeword_reg
        return cls(contrastive, weight_decay, codeword_reg, total)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine similarity of a zero vector is undefined")
    return float(a @ b / (na * nb))


def positive_index(n_rows: int) -> np.ndarray:
    """Row index of each row's positive key: (q + N_B) mod 2N_B."""
    return (np.arange(n_rows) + n_rows // 2) % n_rows


def check_batch(recon: np.ndarray) -> np.ndarray:
    """Validate a (2N_B, D) batch of reconstructions; returns it as float64."""
    r = np.asarray(recon, dtype=np.float64)
    if r.ndim != 2:
        raise BatchTooSmallError(f"batch must be a 2-d array, got shape {r.shape}")
    if r.shape[0] < 4 or r.shape[0] % 2 != 0:
        raise BatchTooSmallError(f"batch needs an even row count >= 4, got {r.shape[0]}")
    if not np.isfinite(r).all():
        raise NonFiniteError("batch contains non-finite values")
    return r


def cosine_matrix(recon: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities of the batch rows (2N_B, 2N_B)."""
    r = np.asarray(recon, dtype=np.float64)
    norms = np.linalg.norm(r, axis=1)
    if (norms == 0.0).any():
        raise ZeroNormError("batch contains a zero-norm row")
    unit = r / norms[:, None]
    return unit @ unit.T


def denominator_mask(sims: np.ndarray, eta: int) -> np.ndarray:
    """Boolean (2N, 2N) mask of each query's denominator terms.

    Row q marks the positive key plus the negatives that survive clipping:
    the eta highest-similarity negatives are dropped, ties at the boundary
    resolved by a stable ascending sort over (score, row index).
    """
    n = sims.shape[0]
    n_scores = n - 2
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if eta >= n_scores:
        raise ClippingExhaustedError(
            f"eta={eta} drops all {n_scores} negative scores; at most {n_scores - 1} may be clipped"
        )
    pos = positive_index(n)
    rows = np.arange(n)
    negatives = np.ones((n, n), dtype=bool)
    negatives[rows, rows] = False
    negatives[rows, pos] = False
    if eta > 0:
        # excluded entries sort first as -inf; the sorted suffix is all negatives
        keyed = np.where(negatives, sims, -np.inf)
        order = np.argsort(keyed, axis=1, kind="stable")
        dropped = order[:, n - eta:]
        negatives[rows[:, None], dropped] = False
    mask = negatives
    mask[rows, pos] = True
    return mask


def _masked_contrastive_sum(sims: np.ndarray, tau: float, mask: np.ndarray) -> float:
    """Sum over queries of -log softmax(positive | masked denominator)."""
    n = sims.shape[0]
    pos = positive_index(n)
    scaled = sims / tau
    shift = np.where(mask, scaled, -np.inf).max(axis=1)
    terms = np.exp(np.where(mask, scaled - shift[:, None], -np.inf))
    log_denom = shift + np.log(terms.sum(axis=1))
    per_query = log_denom - scaled[np.arange(n), pos]
    return float(per_query.sum())


def vanilla_loss(recon: np.ndarray, tau: float) -> float:
    """Contrastive loss with every negative kept, summed over all 2N_B queries."""
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    r = check_batch(recon)
    sims = cosine_matrix(r)
    n = sims.shape[0]
    mask = ~np.eye(n, dtype=bool)
    return _masked_contrastive_sum(sims, tau, mask)


def clipped_loss(recon: np.ndarray, tau: float, eta: int) -> float:
    """Contrastive loss with the eta highest-similarity negatives dropped per query."""
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    r = check_batch(recon)
    sims = cosine_matrix(r)
    mask = denominator_mask(sims, eta)
    return _masked_contrastive_sum(sims, tau, mask)


def codeword_regularizer(books: Codebooks) -> float:
    """Average inter-codeword cosine similarity across all codebooks.

    Per codebook: the mean over unordered codeword pairs {i, j}, i != j;
    the result is the mean of those per-codebook values.
    """
    if books.k < 2:
        raise ValueError(f"codeword regularizer needs K >= 2, got K={books.k}")
    w = books.weights
    norms = np.linalg.norm(w, axis=2)
    if (norms == 0.0).any():
        raise ZeroNormError("codebook contains a zero-norm codeword")
    unit = w / norms[:, :, None]
    cos = np.matmul(unit, unit.transpose(0, 2, 1))
    k = books.k
    off_sum = cos.sum(axis=(1, 2)) - np.trace(cos, axis1=1, axis2=2)
    per_book = off_sum / (k * (k - 1))
    return float(per_book.mean())


def head_weight_decay(head) -> float:
    """Squared Frobenius norm of the projection head (codebooks excluded)."""
    value = float(np.sum(np.asarray(head.w, dtype=np.float64) ** 2))
    if getattr(head, "bias", None) is not None:
        value += float(np.sum(np.asarray(head.bias, dtype=np.float64) ** 2))
    return value


def total_objective(recon: np.ndarray, books: Codebooks, head,
                    tau: float, eta: int, beta: float, gamma: float) -> LossBreakdown:
    """Clipped contrastive loss plus weighted decay and codeword regularizer."""
    contrastive = clipped_loss(recon, tau, eta)
    decay = head_weight_decay(head)
    reg = codeword_regularizer(books)
    return LossBreakdown.assemble(contrastive, decay, reg, beta, gamma)
