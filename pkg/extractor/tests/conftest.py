"""Shared fixtures: small on-disk image folders of seeded RGB noise."""

import numpy as np
import pytest
from PIL import Image


def fill_folder(root, categories, per_category, size=(48, 40), seed=11):
    """One subfolder per category, noise PNGs inside; returns the image count."""
    rng = np.random.default_rng(seed)
    for name in categories:
        sub = root / name
        sub.mkdir(parents=True)
        for i in range(per_category):
            arr = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
            Image.fromarray(arr, "RGB").save(sub / f"img_{i:03d}.png")
    return len(categories) * per_category


@pytest.fixture(scope="session")
def image_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("imgs")
    fill_folder(root, ("ants", "bees", "cats"), 8)
    return root


@pytest.fixture(scope="session")
def flat_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("flat")
    rng = np.random.default_rng(3)
    for i in range(5):
        arr = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        Image.fromarray(arr, "RGB").save(root / f"pic{i}.png")
    return root


@pytest.fixture(scope="session")
def hundred_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("hundred")
    assert fill_folder(root, ("left", "right"), 50, size=(40, 40), seed=7) == 100
    return root


@pytest.fixture(scope="session")
def colored_root(tmp_path_factory):
    """Categories that are visually separable: one base color each."""
    root = tmp_path_factory.mktemp("colored")
    rng = np.random.default_rng(2)
    for name, base in (("r", (200, 30, 30)), ("g", (30, 200, 30)), ("b", (30, 30, 200))):
        sub = root / name
        sub.mkdir()
        for i in range(8):
            noise = rng.integers(-25, 26, size=(40, 40, 3))
            arr = np.clip(np.array(base) + noise, 0, 255).astype(np.uint8)
            Image.fromarray(arr, "RGB").save(sub / f"{i}.png")
    return root
