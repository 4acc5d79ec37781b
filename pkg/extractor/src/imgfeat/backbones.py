"""Frozen encoders mapping fixed-size RGB arrays to feature vectors.

`pixel-proj` is a seeded random projection of raw pixels: nothing to fetch,
deterministic everywhere, enough to exercise the full pipeline on synthetic
folders.  `vit-b32` emits the class-token embedding of a pretrained vision
transformer (32-pixel patches) and refuses to run unless its checkpoint is
already on disk; this tool never downloads weights.
"""

from pathlib import Path

import numpy as np

from .errors import ExtractorError, WeightsUnavailableError

BACKBONES = ("pixel-proj", "vit-b32")

_PROJECTION_SEED = 74  # fixed: the backbone is frozen, not part of job seeding
_IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


class PixelProjection:
    """Gaussian projection of centered pixel values."""

    name = "pixel-proj"
    input_size = 32

    def __init__(self, d_out: int = 64):
        if d_out < 1:
            raise ValueError("d_out must be positive")
        self.d_out = d_out
        flat = 3 * self.input_size * self.input_size
        rng = np.random.default_rng(_PROJECTION_SEED)
        self._w = rng.standard_normal((flat, d_out)) / np.sqrt(flat)

    def embed(self, batch: np.ndarray) -> np.ndarray:
        x = _checked(batch, self.input_size)
        # accumulate in f64 and round once, so gemm tile shapes picked for
        # the batch size cannot reach the stored bits
        flat = x.reshape(len(x), -1).astype(np.float64) - 0.5
        return (flat @ self._w).astype(np.float32)


class VitClassToken:
    """Class-token output of the last transformer block, classifier removed."""

    name = "vit-b32"
    input_size = 224
    d_out = 768

    def __init__(self, weights: "Path | None" = None):
        try:
            import torch
            from torchvision.models import ViT_B_32_Weights, vit_b_32
        except ImportError as exc:
            raise ExtractorError(f"vit-b32 needs the [vit] extra installed: {exc}") from exc

        path = Path(weights) if weights is not None else _cached_checkpoint(
            torch, ViT_B_32_Weights.IMAGENET1K_V1.url)
        if path is None or not path.is_file():
            raise WeightsUnavailableError(
                "vit-b32 checkpoint not found; place it in the torch hub cache or pass --weights")
        model = vit_b_32(weights=None)
        model.load_state_dict(torch.load(path, map_location="cpu"))
        model.heads = torch.nn.Identity()
        model.eval()
        self._torch = torch
        self._model = model

    def embed(self, batch: np.ndarray) -> np.ndarray:
        x = _checked(batch, self.input_size)
        x = (x - _IMAGENET_MEAN) / _IMAGENET_STD
        x = np.ascontiguousarray(x.transpose(0, 3, 1, 2))
        with self._torch.no_grad():
            out = self._model(self._torch.from_numpy(x))
        return np.asarray(out.numpy(), dtype=np.float32)


def load_backbone(name: str, dim: "int | None" = None, weights: "Path | None" = None):
    if name == "pixel-proj":
        return PixelProjection(d_out=dim if dim is not None else 64)
    if name == "vit-b32":
        if dim is not None and dim != VitClassToken.d_out:
            raise ValueError(f"vit-b32 emits {VitClassToken.d_out}-dim features; dim does not apply")
        return VitClassToken(weights=weights)
    raise ValueError(f"unknown backbone {name!r}")


def _checked(batch, size) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float32)
    if x.ndim != 4 or x.shape[1:] != (size, size, 3):
        raise ValueError(f"expected (n, {size}, {size}, 3) batches, got shape {x.shape}")
    return x


def _cached_checkpoint(torch, url: str) -> "Path | None":
    path = Path(torch.hub.get_dir()) / "checkpoints" / url.rsplit("/", 1)[-1]
    return path if path.is_file() else None
