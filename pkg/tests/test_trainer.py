import numpy as np
import pytest

from clipq.config import Hyperparams
from clipq.errors import BatchTooSmallError, EmptyDatasetError, ZeroNormError
from clipq.objective import total_objective, vanilla_loss
from clipq.quantizer import Codebooks, soft_assign_batch
from clipq.trainer import (
    ProjectionHead,
    fit,
    forward,
    gradients,
    init_parameters,
    project_batch,
)

from conftest import feature_set


def objective_value(x, head, books, hyper):
    z, _, _ = project_batch(x, head)
    _, recon = soft_assign_batch(z, books, hyper.alpha)
    return total_objective(recon, books, head, hyper.tau, hyper.eta,
                           hyper.beta, hyper.gamma).total


def finite_difference(x, head, books, hyper, step=1e-5):
    """Central differences through the whole objective for every parameter."""
    def perturbed(delta_w=None, delta_b=None, delta_c=None):
        w = head.w + (delta_w if delta_w is not None else 0.0)
        b = None if head.bias is None else head.bias + (delta_b if delta_b is not None else 0.0)
        ww = books.weights + (delta_c if delta_c is not None else 0.0)
        return objective_value(x, ProjectionHead(w, b), Codebooks(ww), hyper)

    fd_w = np.zeros_like(head.w)
    for idx in np.ndindex(*head.w.shape):
        e = np.zeros_like(head.w)
        e[idx] = step
        fd_w[idx] = (perturbed(delta_w=e) - perturbed(delta_w=-e)) / (2 * step)
    fd_c = np.zeros_like(books.weights)
    for idx in np.ndindex(*books.weights.shape):
        e = np.zeros_like(books.weights)
        e[idx] = step
        fd_c[idx] = (perturbed(delta_c=e) - perturbed(delta_c=-e)) / (2 * step)
    return fd_w, fd_c


def max_rel_err(a, b, floor=1e-6):
    return float((np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)).max())


class TestInit:
    def test_seed_determinism(self):
        h1, b1 = init_parameters(12, 8, 2, 4, seed=3)
        h2, b2 = init_parameters(12, 8, 2, 4, seed=3)
        assert np.array_equal(h1.w, h2.w)
        assert np.array_equal(b1.weights, b2.weights)

    def test_codebook_shape(self):
        _, books = init_parameters(768, 768, 8, 256, seed=0)
        assert books.weights.shape == (8, 256, 96)

    def test_codewords_unit_norm(self):
        _, books = init_parameters(16, 8, 4, 8, seed=1)
        assert np.allclose(np.linalg.norm(books.weights, axis=2), 1.0, atol=1e-9)


class TestForward:
    def test_identity_head_passes_unit_vector(self):
        head = ProjectionHead(np.eye(4))
        raw = np.array([0.0, 0.6, 0.0, 0.8])
        books = Codebooks(np.ones((1, 2, 4)))
        z, _ = forward(raw, head, books, alpha=1.0)
        assert z == pytest.approx(raw, abs=1e-12)

    def test_zero_vector_rejected(self):
        head = ProjectionHead(np.eye(4))
        books = Codebooks(np.ones((1, 2, 4)))
        with pytest.raises(ZeroNormError):
            forward(np.zeros(4), head, books, alpha=1.0)

    def test_projection_is_unit_norm(self, rng):
        head = ProjectionHead(rng.normal(size=(6, 10)))
        z, _, _ = project_batch(rng.normal(size=(20, 10)), head)
        assert np.allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-9)


class TestGradients:
    def test_matches_finite_differences(self, rng, toy_hyper):
        head, books = init_parameters(12, 6, 2, 4, seed=11, use_bias=True)
        x = rng.normal(size=(8, 12))
        got = gradients(x, head, books, toy_hyper)
        fd_w, fd_c = finite_difference(x, head, books, toy_hyper)
        assert max_rel_err(got.d_w, fd_w) <= 1e-4
        assert max_rel_err(got.d_codebooks, fd_c) <= 1e-4

    def test_unclipped_plain_loss_gradient(self, rng):
        # beta = gamma = eta = 0: gradient must be the bare contrastive one
        hyper = Hyperparams(m=2, k=4, alpha=4.0, tau=0.5, eta=0, beta=0.0,
                            gamma=0.0, dim=6, batch_size=4)
        head, books = init_parameters(10, 6, 2, 4, seed=2)
        x = rng.normal(size=(8, 10))
        got = gradients(x, head, books, hyper)

        def loss_only(w):
            z, _, _ = project_batch(x, ProjectionHead(w))
            _, recon = soft_assign_batch(z, books, hyper.alpha)
            return vanilla_loss(recon, hyper.tau)

        step = 1e-5
        for idx in [(0, 0), (3, 4), (5, 9)]:
            e = np.zeros_like(head.w)
            e[idx] = step
            fd = (loss_only(head.w + e) - loss_only(head.w - e)) / (2 * step)
            assert got.d_w[idx] == pytest.approx(fd, rel=1e-5, abs=1e-9)

    def test_unused_codeword_gets_no_signal(self, rng):
        # one codeword pointing away from all data takes ~zero soft mass;
        # with gamma = 0 its gradient must vanish
        hyper = Hyperparams(m=1, k=4, alpha=60.0, tau=0.5, eta=0, beta=0.0,
                            gamma=0.0, dim=4, batch_size=4)
        w = rng.normal(size=(1, 4, 4))
        w /= np.linalg.norm(w, axis=2, keepdims=True)
        data = rng.normal(size=(8, 4)) + 4.0
        w[0, 3] = -(data / np.linalg.norm(data, axis=1, keepdims=True)).mean(axis=0)
        w[0, 3] /= np.linalg.norm(w[0, 3])
        books = Codebooks(w)
        head = ProjectionHead(np.eye(4))
        got = gradients(data, head, books, hyper)
        assert np.abs(got.d_codebooks[0, 3]).max() < 1e-12

    def test_batch_must_pair_views(self, rng, toy_hyper, toy_parameters):
        head, books = toy_parameters
        with pytest.raises(BatchTooSmallError):
            gradients(rng.normal(size=(3, 12)), head, books, toy_hyper)


class TestFit:
    def test_seed_reproducibility(self, rng, toy_hyper):
        fs = feature_set(rng, n=12, v=2, d_in=12)
        h1, b1, r1 = fit(fs, toy_hyper)
        h2, b2, r2 = fit(fs, toy_hyper)
        assert np.array_equal(h1.w, h2.w)
        assert np.array_equal(b1.weights, b2.weights)
        assert [e.total for e in r1.history] == [e.total for e in r2.history]

    def test_history_bounded_and_best_is_min(self, rng, toy_hyper):
        fs = feature_set(rng, n=12, v=2, d_in=12)
        _, _, report = fit(fs, toy_hyper)
        assert len(report.history) <= toy_hyper.max_epochs
        totals = [e.total for e in report.history]
        assert report.best_epoch == int(np.argmin(totals))

    def test_zero_epochs_returns_init(self, rng, toy_hyper):
        from dataclasses import replace

        fs = feature_set(rng, n=12, v=2, d_in=12)
        head, books, report = fit(fs, replace(toy_hyper, max_epochs=0))
        h0, b0 = init_parameters(12, 6, 2, 4, toy_hyper.seed)
        assert np.array_equal(head.w, h0.w)
        assert np.array_equal(books.weights, b0.weights)
        assert report.history == []

    def test_stalled_loss_stops_early(self, rng, toy_hyper, monkeypatch):
        from dataclasses import replace

        import clipq.trainer as trainer_module

        # frozen optimizer plus a single full-coverage batch: identical loss
        # every epoch, so the patience window is the only thing that matters
        monkeypatch.setattr(trainer_module._Adam, "step",
                            lambda self, param, grad: param)
        fs = feature_set(rng, n=4, v=2, d_in=12)
        _, _, report = fit(fs, replace(toy_hyper, max_epochs=40))
        assert len(report.history) == 6  # first epoch plus the patience window

    def test_loss_decreases_on_separable_data(self, rng):
        hyper = Hyperparams(m=2, k=4, alpha=10.0, tau=0.2, eta=0, batch_size=8,
                            max_epochs=10, dim=8, seed=0)
        fs = feature_set(rng, n=32, v=2, d_in=16)
        _, _, report = fit(fs, hyper)
        assert report.history[-1].total < report.history[0].total

    def test_single_view_rejected(self, rng, toy_hyper):
        from clipq.errors import DimensionError

        fs = feature_set(rng, n=12, v=1, d_in=12)
        with pytest.raises(DimensionError):
            fit(fs, toy_hyper)

    def test_batch_larger_than_dataset_rejected(self, rng, toy_hyper):
        from dataclasses import replace

        fs = feature_set(rng, n=3, v=2, d_in=12)
        with pytest.raises(BatchTooSmallError):
            fit(fs, replace(toy_hyper, batch_size=4))

    def test_empty_dataset_rejected(self, toy_hyper):
        import numpy as np

        from clipq.data import FeatureSet

        fs = FeatureSet(item_ids=np.empty(0, np.uint64),
                        labels=np.empty((0, 1), np.uint8),
                        features=np.empty((0, 2, 12), np.float32), vocab=3)
        with pytest.raises(EmptyDatasetError):
            fit(fs, toy_hyper)
