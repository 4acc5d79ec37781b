"""Seeded image views.

Training items get independently augmented views drawn from the usual
contrastive family: random resized crop, horizontal flip, color jitter,
graying, gaussian blur, with the magnitudes pinned in `DEFAULT_RECIPE`.
Database and query items get a single deterministic center view.  Every
random draw comes from a generator keyed by (seed, item id, view index),
so output never depends on processing order or worker count.
"""

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageEnhance, ImageFilter


@dataclass(frozen=True)
class Recipe:
    """Augmentation magnitudes; the *_prob fields gate whole operations."""

    crop_scale: "tuple[float, float]" = (0.5, 1.0)
    crop_ratio: "tuple[float, float]" = (0.75, 4.0 / 3.0)
    flip_prob: float = 0.5
    jitter_prob: float = 0.7
    brightness: float = 0.4
    contrast: float = 0.4
    saturation: float = 0.4
    hue: float = 0.1
    gray_prob: float = 0.2
    blur_prob: float = 0.5
    blur_sigma: "tuple[float, float]" = (0.1, 2.0)


DEFAULT_RECIPE = Recipe()


def view_rng(seed: int, item_id: int, view: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, item_id, view)))


def center_view(img: Image.Image, size: int) -> Image.Image:
    """Shorter side scaled to `size`, then a central square crop."""
    img = img.convert("RGB")
    w, h = img.size
    scale = size / min(w, h)
    img = img.resize((max(size, round(w * scale)), max(size, round(h * scale))), Image.BILINEAR)
    left = (img.width - size) // 2
    top = (img.height - size) // 2
    return img.crop((left, top, left + size, top + size))


def augment_view(img: Image.Image, rng: np.random.Generator, size: int,
                 recipe: Recipe = DEFAULT_RECIPE) -> Image.Image:
    img = img.convert("RGB")
    img = _random_crop(img, rng, size, recipe)
    if rng.random() < recipe.flip_prob:
        img = img.transpose(Image.FLIP_LEFT_RIGHT)
    if rng.random() < recipe.jitter_prob:
        img = _jitter(img, rng, recipe)
    if rng.random() < recipe.gray_prob:
        img = img.convert("L").convert("RGB")
    if rng.random() < recipe.blur_prob:
        img = img.filter(ImageFilter.GaussianBlur(radius=rng.uniform(*recipe.blur_sigma)))
    return img


def as_array(img: Image.Image) -> np.ndarray:
    """HWC float32 in [0, 1]."""
    return np.asarray(img, dtype=np.float32) / 255.0


def _random_crop(img, rng, size, recipe):
    w, h = img.size
    area = w * h
    for _ in range(10):
        target = area * rng.uniform(*recipe.crop_scale)
        ratio = math.exp(rng.uniform(math.log(recipe.crop_ratio[0]), math.log(recipe.crop_ratio[1])))
        cw = round(math.sqrt(target * ratio))
        ch = round(math.sqrt(target / ratio))
        if 0 < cw <= w and 0 < ch <= h:
            left = int(rng.integers(0, w - cw + 1))
            top = int(rng.integers(0, h - ch + 1))
            return img.crop((left, top, left + cw, top + ch)).resize((size, size), Image.BILINEAR)
    # extreme aspect ratios can exhaust the attempts; fall back deterministically
    return center_view(img, size)


def _jitter(img, rng, recipe):
    img = ImageEnhance.Brightness(img).enhance(1.0 + rng.uniform(-recipe.brightness, recipe.brightness))
    img = ImageEnhance.Contrast(img).enhance(1.0 + rng.uniform(-recipe.contrast, recipe.contrast))
    img = ImageEnhance.Color(img).enhance(1.0 + rng.uniform(-recipe.saturation, recipe.saturation))
    return _shift_hue(img, rng.uniform(-recipe.hue, recipe.hue))


def _shift_hue(img, amount):
    # amount is in turns; PIL stores hue as a byte, so the shift wraps mod 256
    h, s, v = img.convert("HSV").split()
    offset = round(amount * 255)
    table = [(i + offset) % 256 for i in range(256)]
    return Image.merge("HSV", (h.point(table), s, v)).convert("RGB")
