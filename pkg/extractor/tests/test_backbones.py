"""Backbone contracts: frozen determinism and the no-download weights rule."""

import numpy as np
import pytest

from imgfeat.backbones import PixelProjection, load_backbone
from imgfeat.errors import WeightsUnavailableError


@pytest.fixture()
def batch():
    rng = np.random.default_rng(5)
    return rng.random((4, 32, 32, 3), dtype=np.float32)


class TestPixelProjection:
    def test_shape_and_dtype(self, batch):
        out = PixelProjection(d_out=16).embed(batch)
        assert out.shape == (4, 16)
        assert out.dtype == np.float32

    def test_frozen_across_instances(self, batch):
        a = PixelProjection(d_out=16).embed(batch)
        b = PixelProjection(d_out=16).embed(batch)
        assert np.array_equal(a, b)

    def test_distinguishes_inputs(self, batch):
        out = PixelProjection(d_out=16).embed(batch)
        assert not np.array_equal(out[0], out[1])

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError, match="shape"):
            PixelProjection().embed(np.zeros((2, 16, 16, 3), dtype=np.float32))

    def test_rejects_nonpositive_width(self):
        with pytest.raises(ValueError, match="positive"):
            PixelProjection(d_out=0)


class TestLoadBackbone:
    def test_dim_routes_to_projection(self):
        assert load_backbone("pixel-proj", dim=8).d_out == 8
        assert load_backbone("pixel-proj").d_out == 64

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown backbone"):
            load_backbone("resnet-999")

    def test_vit_rejects_dim_override(self):
        with pytest.raises(ValueError, match="does not apply"):
            load_backbone("vit-b32", dim=100)


class TestVitWeightsPolicy:
    def test_missing_checkpoint_refuses_to_run(self, tmp_path, monkeypatch):
        pytest.importorskip("torchvision")
        monkeypatch.setenv("TORCH_HOME", str(tmp_path))  # empty cache: no checkpoint
        with pytest.raises(WeightsUnavailableError, match="checkpoint"):
            load_backbone("vit-b32")

    def test_explicit_weights_path_must_exist(self, tmp_path, monkeypatch):
        pytest.importorskip("torchvision")
        monkeypatch.setenv("TORCH_HOME", str(tmp_path))
        with pytest.raises(WeightsUnavailableError):
            load_backbone("vit-b32", weights=tmp_path / "nope.pth")
