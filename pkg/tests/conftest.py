import numpy as np
import pytest

from clipq.config import Hyperparams
from clipq.data import FeatureSet, pack_labels
from clipq.quantizer import Codebooks
from clipq.trainer import ProjectionHead, init_parameters


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_books():
    """M=1, K=2, d=2: identity-friendly codebook used by hand examples."""
    return Codebooks(np.array([[[1.0, 0.0], [0.0, 1.0]]]))


def random_batch(rng, n_items=4, dim=8, scale=1.0):
    """Unit-norm reconstruction rows in view-pair order."""
    x = rng.normal(size=(2 * n_items, dim)) * scale
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_books(rng, m=2, k=4, d=3, normalize=True):
    w = rng.normal(size=(m, k, d))
    if normalize:
        w /= np.linalg.norm(w, axis=2, keepdims=True)
    return Codebooks(w)


def feature_set(rng, n=20, v=2, d_in=12, vocab=5, ids=None):
    masks = np.zeros((n, vocab), dtype=bool)
    masks[np.arange(n), rng.integers(0, vocab, n)] = True
    return FeatureSet(
        item_ids=np.arange(n, dtype=np.uint64) if ids is None else ids,
        labels=pack_labels(masks, vocab),
        features=rng.normal(size=(n, v, d_in)).astype(np.float32),
        vocab=vocab,
    )


@pytest.fixture
def small_features(rng):
    return feature_set(rng)


@pytest.fixture
def toy_hyper():
    return Hyperparams(m=2, k=4, alpha=3.0, tau=0.3, eta=2, beta=0.01, gamma=0.05,
                       batch_size=4, max_epochs=3, dim=6, seed=7)


@pytest.fixture
def toy_parameters():
    head, books = init_parameters(d_in=12, d=6, m=2, k=4, seed=7)
    return head, books
