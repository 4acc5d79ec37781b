"""Trainable parameters, analytic gradients and the training loop.

Gradients for the full objective are computed by hand through the chain
clipped-contrastive loss -> cosine similarity -> soft reconstruction ->
alpha-softmax -> codewords and projected features -> head weights.  The
clipping drop-set is held fixed within a step (no gradient through the
sort), which is the usual subgradient treatment of a discrete selection.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Hyperparams
from .data import FeatureSet
from .errors import (
    BatchTooSmallError,
    DimensionError,
    EmptyDatasetError,
    NonFiniteError,
    ZeroNormError,
)
from .objective import (
    LossBreakdown,
    codeword_regularizer,
    denominator_mask,
    head_weight_decay,
    positive_index,
)
from .quantizer import Codebooks, SoftAssignment, mix_codewords, segment_dots, soft_quantize


@dataclass
class ProjectionHead:
    """Linear map from raw feature space (D_in) to quantization space (D)."""

    w: np.ndarray  # (D, D_in) float64
    bias: "np.ndarray | None" = None

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.ndim != 2:
            raise DimensionError(f"head weights must be (D, D_in), got shape {self.w.shape}")
        if not np.isfinite(self.w).all():
            raise NonFiniteError("head weights contain non-finite values")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)
            if self.bias.shape != (self.w.shape[0],):
                raise DimensionError("bias length does not match output dimension")
            if not np.isfinite(self.bias).all():
                raise NonFiniteError("bias contains non-finite values")

    @property
    def d_out(self) -> int:
        return self.w.shape[0]

    @property
    def d_in(self) -> int:
        return self.w.shape[1]

    def copy(self) -> "ProjectionHead":
        return ProjectionHead(self.w.copy(), None if self.bias is None else self.bias.copy())


@dataclass
class TrainReport:
    """Per-epoch loss history plus where the best parameters came from."""

    history: "list[LossBreakdown]" = field(default_factory=list)
    best_epoch: int = -1
    wall_seconds: float = 0.0
    snapshot_path: "Path | None" = None


@dataclass
class Gradients:
    d_w: np.ndarray
    d_bias: "np.ndarray | None"
    d_codebooks: np.ndarray
    breakdown: LossBreakdown


def init_parameters(d_in: int, d: int, m: int, k: int, seed: int,
                    use_bias: bool = False) -> "tuple[ProjectionHead, Codebooks]":
    """Seed-determined Gaussian init: Glorot-style head, unit-norm codewords."""
    if d % m != 0:
        raise DimensionError(f"output dim {d} is not divisible by m={m}")
    rng = np.random.default_rng(seed)
    std = np.sqrt(2.0 / (d_in + d))
    w = rng.normal(0.0, std, size=(d, d_in))
    bias = np.zeros(d) if use_bias else None
    words = rng.normal(0.0, 1.0, size=(m, k, d // m))
    words /= np.linalg.norm(words, axis=2, keepdims=True)
    return ProjectionHead(w, bias), Codebooks(words)


def project_batch(raw: np.ndarray, head: ProjectionHead) -> "tuple[np.ndarray, np.ndarray, np.ndarray]":
    """Project raw rows through the head and L2-normalize each result.

    Returns (z, u, norms) where u is the pre-normalization projection,
    z = u / |u| row-wise.
    """
    x = np.asarray(raw, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != head.d_in:
        raise DimensionError(f"raw dim {x.shape[1]} does not match head input {head.d_in}")
    if not np.isfinite(x).all():
        raise NonFiniteError("raw features contain non-finite values")
    u = x @ head.w.T
    if head.bias is not None:
        u = u + head.bias
    norms = np.linalg.norm(u, axis=1)
    if (norms == 0.0).any():
        raise ZeroNormError("projection produced a zero vector; cannot normalize")
    z = u / norms[:, None]
    return z, u, norms


def forward(raw: np.ndarray, head: ProjectionHead, books: Codebooks,
            alpha: float) -> "tuple[np.ndarray, SoftAssignment]":
    """Project + normalize one raw vector, then soft-quantize it."""
    z, _, _ = project_batch(raw, head)
    return z[0], soft_quantize(z[0], books, alpha)


def _forward_pieces(raw: np.ndarray, head: ProjectionHead, books: Codebooks, alpha: float):
    """Everything the backward pass needs, computed once."""
    z, u, u_norms = project_batch(raw, head)
    n = z.shape[0]
    if z.shape[1] != books.dim:
        raise DimensionError(f"projected dim {z.shape[1]} does not match codebooks dim {books.dim}")
    zseg = z.reshape(n, books.m, books.d)
    logits = alpha * segment_dots(zseg, books.weights)
    logits -= logits.max(axis=2, keepdims=True)
    expl = np.exp(logits)
    probs = expl / expl.sum(axis=2, keepdims=True)
    recon = mix_codewords(probs, books.weights).reshape(n, books.dim)
    return z, u, u_norms, zseg, probs, recon


def _codeword_accumulate(coef: np.ndarray, seg: np.ndarray) -> np.ndarray:
    """(n, M, K) x (n, M, d) -> (M, K, d): per-codeword sums over the batch."""
    return np.matmul(coef.transpose(1, 2, 0), seg.transpose(1, 0, 2))


def _regularizer_gradient(books: Codebooks) -> np.ndarray:
    """d(mean inter-codeword cosine)/d(weights), shape (M, K, d)."""
    w = books.weights
    m, k, _ = w.shape
    norms = np.linalg.norm(w, axis=2)
    if (norms == 0.0).any():
        raise ZeroNormError("codebook contains a zero-norm codeword")
    unit = w / norms[:, :, None]
    cos = np.matmul(unit, unit.transpose(0, 2, 1))
    others_sum = unit.sum(axis=1, keepdims=True) - unit  # sum_{j != i} unit_j
    cos_sum = cos.sum(axis=2) - 1.0  # sum_{j != i} cos_ij
    pairs = k * (k - 1) / 2.0
    grad = (others_sum - cos_sum[:, :, None] * unit) / norms[:, :, None]
    return grad / (m * pairs)


def gradients(raw_views: np.ndarray, head: ProjectionHead, books: Codebooks,
              hyper: Hyperparams) -> Gradients:
    """Analytic d(total objective)/d(head), d/d(codebooks) for one batch.

    `raw_views` is (2N_B, D_in) in BatchViews order.  The returned breakdown
    matches `objective.total_objective` on the same forward pass.
    """
    x = np.asarray(raw_views, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 4 or x.shape[0] % 2 != 0:
        raise BatchTooSmallError(f"batch must be (2N_B, D_in) with N_B >= 2, got shape {x.shape}")
    z, u, u_norms, zseg, probs, recon = _forward_pieces(x, head, books, hyper.alpha)
    n = x.shape[0]

    recon_norms = np.linalg.norm(recon, axis=1)
    if (recon_norms == 0.0).any():
        raise ZeroNormError("soft reconstruction has zero norm")
    rhat = recon / recon_norms[:, None]
    sims = rhat @ rhat.T

    mask = denominator_mask(sims, hyper.eta)
    pos = positive_index(n)
    rows = np.arange(n)

    scaled = sims / hyper.tau
    shift = np.where(mask, scaled, -np.inf).max(axis=1)
    terms = np.exp(np.where(mask, scaled - shift[:, None], -np.inf))
    denom = terms.sum(axis=1)
    contrastive = float((shift + np.log(denom) - scaled[rows, pos]).sum())

    # dL/dS, accumulated for q-as-query; S is symmetric so add the transpose
    g = terms / denom[:, None]
    g[rows, pos] -= 1.0
    g /= hyper.tau
    g_sym = g + g.T

    # cosine backward: dL/drecon_q = (sum_k G[q,k] rhat_k - (sum_k G[q,k] S[q,k]) rhat_q) / |recon_q|
    row_dot = (g_sym * sims).sum(axis=1)
    d_recon = (g_sym @ rhat - row_dot[:, None] * rhat) / recon_norms[:, None]

    # reconstruction backward: recon^m = sum_i p^m_i c^m_i
    d_recon_seg = d_recon.reshape(n, books.m, books.d)
    d_books = _codeword_accumulate(probs, d_recon_seg)
    d_probs = segment_dots(d_recon_seg, books.weights)

    # softmax backward, then logits = alpha * z^m . c^m_i
    inner = (d_probs * probs).sum(axis=2, keepdims=True)
    d_logits = probs * (d_probs - inner)
    d_zseg = hyper.alpha * mix_codewords(d_logits, books.weights)
    d_books += hyper.alpha * _codeword_accumulate(d_logits, zseg)

    # normalization backward: z = u / |u|
    d_z = d_zseg.reshape(n, books.dim)
    d_u = (d_z - (d_z * z).sum(axis=1, keepdims=True) * z) / u_norms[:, None]

    d_w = d_u.T @ x
    d_bias = d_u.sum(axis=0) if head.bias is not None else None

    decay = head_weight_decay(head)
    if hyper.beta != 0.0:
        d_w = d_w + 2.0 * hyper.beta * head.w
        if d_bias is not None:
            d_bias = d_bias + 2.0 * hyper.beta * head.bias
    reg = codeword_regularizer(books)
    if hyper.gamma != 0.0:
        d_books += hyper.gamma * _regularizer_gradient(books)

    breakdown = LossBreakdown.assemble(contrastive, decay, reg, hyper.beta, hyper.gamma)
    for name, arr in (("d_w", d_w), ("d_codebooks", d_books)):
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"{name} is non-finite (loss={breakdown.total}); check inputs and hyperparameters")
    if d_bias is not None and not np.isfinite(d_bias).all():
        raise NonFiniteError("d_bias is non-finite")
    return Gradients(d_w=d_w, d_bias=d_bias, d_codebooks=d_books, breakdown=breakdown)


class _Adam:
    """Adam moments for one parameter tensor."""

    def __init__(self, shape, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return param - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# early stopping: stop once the best loss has not improved by at least
# MIN_DELTA for PATIENCE consecutive epochs
MIN_DELTA = 1e-4
PATIENCE = 5


def fit(features: FeatureSet, hyper: Hyperparams, *,
        progress=None) -> "tuple[ProjectionHead, Codebooks, TrainReport]":
    """Mini-batch Adam training of head + codebooks on two-view features.

    Views are taken from the feature file: epoch e uses the pre-materialized
    pair (2j, 2j+1) with j = e mod (V // 2).  Trailing partial batches are
    dropped so every batch sees the same number of negatives.  Returns the
    parameters from the best-loss epoch.
    """
    hyper.validate()
    if features.n_items == 0:
        raise EmptyDatasetError("cannot train on an empty feature set")
    if features.n_views < 2:
        raise DimensionError(f"training needs >= 2 views per item, file has {features.n_views}")
    if hyper.batch_size > features.n_items:
        raise BatchTooSmallError(
            f"batch_size {hyper.batch_size} exceeds dataset size {features.n_items}"
        )
    d = hyper.dim if hyper.dim is not None else features.dim
    if d % hyper.m != 0:
        raise DimensionError(f"projection dim {d} is not divisible by m={hyper.m}")

    start = time.perf_counter()
    head, books = init_parameters(features.dim, d, hyper.m, hyper.k, hyper.seed,
                                  use_bias=hyper.use_bias)
    report = TrainReport()
    best_head, best_books = head.copy(), Codebooks(books.weights.copy())
    if hyper.max_epochs == 0:
        report.wall_seconds = time.perf_counter() - start
        return best_head, best_books, report

    feats = features.features.astype(np.float64)
    rng = np.random.default_rng(hyper.seed)
    opt_w = _Adam(head.w.shape, hyper.lr_head)
    opt_b = _Adam(head.bias.shape, hyper.lr_head) if head.bias is not None else None
    opt_c = _Adam(books.weights.shape, hyper.lr_codebooks)

    n = features.n_items
    n_b = hyper.batch_size
    n_batches = n // n_b
    pairs = features.n_views // 2
    best_total = np.inf  # strict minimum, owns the returned snapshot
    stop_mark = np.inf  # improvement >= MIN_DELTA resets the stall counter
    stall = 0

    for epoch in range(hyper.max_epochs):
        perm = rng.permutation(n)
        va, vb = 2 * (epoch % pairs), 2 * (epoch % pairs) + 1
        sums = np.zeros(4)
        for b in range(n_batches):
            idx = perm[b * n_b:(b + 1) * n_b]
            batch = np.concatenate([feats[idx, va], feats[idx, vb]], axis=0)
            grads = gradients(batch, head, books, hyper)
            head.w = opt_w.step(head.w, grads.d_w)
            if opt_b is not None:
                head.bias = opt_b.step(head.bias, grads.d_bias)
            books = books.replace_weights(opt_c.step(books.weights, grads.d_codebooks))
            bd = grads.breakdown
            sums += (bd.contrastive, bd.weight_decay, bd.codeword_reg, bd.total)
        mean = sums / n_batches
        entry = LossBreakdown(contrastive=float(mean[0]), weight_decay=float(mean[1]),
                              codeword_reg=float(mean[2]), total=float(mean[3]))
        report.history.append(entry)
        if progress is not None:
            progress(epoch, entry, time.perf_counter() - start)
        if entry.total < best_total:
            best_total = entry.total
            report.best_epoch = epoch
            best_head, best_books = head.copy(), Codebooks(books.weights.copy())
        if entry.total < stop_mark - MIN_DELTA:
            stop_mark = entry.total
            stall = 0
        else:
            stall += 1
            if stall >= PATIENCE:
                break

    report.wall_seconds = time.perf_counter() - start
    return best_head, best_books, report
