"""Segmented soft and hard quantization of feature vectors against codebooks.

A D-dimensional vector is split into M contiguous segments; each segment is
compared with the K codewords of its codebook.  The soft path returns a
differentiable convex combination of codewords, the hard path the index of
the best-scoring codeword.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import is_power_of_two
from .errors import DimensionError, NonFiniteError


@dataclass(frozen=True)
class Codebooks:
    """M codebooks of K codewords each, shape (M, K, d) with d = D / M."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 3:
            raise DimensionError(f"codebooks must be (M, K, d), got shape {w.shape}")
        if not is_power_of_two(w.shape[1]):
            raise DimensionError(f"K must be a power of two, got {w.shape[1]}")
        if not np.isfinite(w).all():
            raise NonFiniteError("codebooks contain non-finite weights")
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def k(self) -> int:
        return self.weights.shape[1]

    @property
    def d(self) -> int:
        return self.weights.shape[2]

    @property
    def dim(self) -> int:
        return self.m * self.d

    def replace_weights(self, weights: np.ndarray) -> "Codebooks":
        return Codebooks(weights)


@dataclass(frozen=True)
class SoftAssignment:
    """Per-segment assignment probabilities and the soft reconstruction."""

    probs: np.ndarray  # (M, K), rows sum to 1
    reconstruction: np.ndarray  # (D,)


def segment(z: np.ndarray, m: int) -> np.ndarray:
    """Split a D-vector into m contiguous segments, returned as (m, D/m) rows.

    Concatenating the rows in order reproduces the input exactly.
    """
    z = np.asarray(z)
    if z.ndim != 1:
        raise DimensionError(f"expected a 1-d vector, got shape {z.shape}")
    if m < 1 or z.shape[0] % m != 0:
        raise DimensionError(f"dimension {z.shape[0]} is not divisible by m={m}")
    if not np.isfinite(z).all():
        raise NonFiniteError("input vector contains non-finite values")
    return z.reshape(m, -1)


def _check_inputs(z: np.ndarray, books: Codebooks) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    if z.shape[-1] != books.dim:
        raise DimensionError(f"vector dim {z.shape[-1]} does not match codebooks dim {books.dim}")
    if not np.isfinite(z).all():
        raise NonFiniteError("input vector contains non-finite values")
    return z


def segment_dots(seg: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """(n, M, d) x (M, K, d) -> (n, M, K) segment-codeword inner products.

    Batched matmul rather than einsum: same contraction, BLAS-backed.
    """
    return np.matmul(seg.transpose(1, 0, 2), weights.transpose(0, 2, 1)).transpose(1, 0, 2)


def mix_codewords(coef: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """(n, M, K) x (M, K, d) -> (n, M, d) codeword mixtures."""
    return np.matmul(coef.transpose(1, 0, 2), weights).transpose(1, 0, 2)


def soft_assign_batch(z: np.ndarray, books: Codebooks, alpha: float) -> "tuple[np.ndarray, np.ndarray]":
    """alpha-softmax assignment for a batch: probs (n, M, K), recon (n, D).

    probs[n, m, i] = exp(alpha * z^m_n . c^m_i) / sum_j exp(alpha * z^m_n . c^m_j),
    computed with max-subtraction so large alpha cannot overflow.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    zb = _check_inputs(z, books)
    n = zb.shape[0]
    seg = zb.reshape(n, books.m, books.d)
    logits = alpha * segment_dots(seg, books.weights)
    logits -= logits.max(axis=2, keepdims=True)
    expl = np.exp(logits)
    probs = expl / expl.sum(axis=2, keepdims=True)
    recon = mix_codewords(probs, books.weights).reshape(n, books.dim)
    return probs, recon


def soft_quantize(z: np.ndarray, books: Codebooks, alpha: float) -> SoftAssignment:
    """Soft-quantize one vector; see `soft_assign_batch` for the formula."""
    probs, recon = soft_assign_batch(z, books, alpha)
    return SoftAssignment(probs=probs[0], reconstruction=recon[0])


def hard_assign_batch(z: np.ndarray, books: Codebooks) -> np.ndarray:
    """Codeword indices (n, M) maximizing each segment-codeword dot product.

    Ties go to the lowest index, so the result is deterministic.
    """
    zb = _check_inputs(z, books)
    n = zb.shape[0]
    seg = zb.reshape(n, books.m, books.d)
    scores = segment_dots(seg, books.weights)
    return scores.argmax(axis=2)


def hard_quantize(z: np.ndarray, books: Codebooks) -> np.ndarray:
    """Hard-quantize one vector to its M codeword indices."""
    return hard_assign_batch(z, books)[0]


def reconstruct_code(code: np.ndarray, books: Codebooks) -> np.ndarray:
    """Concatenate the codewords selected by `code` into a D-vector."""
    code = np.asarray(code)
    if code.shape != (books.m,):
        raise DimensionError(f"code width {code.shape} does not match M={books.m}")
    if (code < 0).any() or (code >= books.k).any():
        raise DimensionError(f"code indices must lie in [0, {books.k})")
    return books.weights[np.arange(books.m), code].reshape(-1)
