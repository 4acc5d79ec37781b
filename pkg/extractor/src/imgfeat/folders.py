"""Folder-of-images datasets.

Two layouts: a flat folder of images (no labels, vocabulary 0), or one
subdirectory per category with the images inside.  Category names sort
lexically to fix their bit positions; item ids number the images in sorted
(category, filename) order, so rescanning the same tree gives the same ids.
"""

from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .errors import ExtractorError, ImageReadError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass(frozen=True)
class ImageEntry:
    item_id: int
    path: Path
    category: "int | None"


@dataclass(frozen=True)
class ImageFolder:
    root: Path
    entries: "tuple[ImageEntry, ...]"
    categories: "tuple[str, ...]"

    @property
    def vocab(self) -> int:
        return len(self.categories)


def scan_folder(root: "str | Path") -> ImageFolder:
    root = Path(root)
    if not root.is_dir():
        raise ExtractorError(f"not a directory: {root}")
    flat = sorted(p for p in root.iterdir() if _is_image(p))
    nested = sorted(
        (sub.name, p)
        for sub in root.iterdir() if sub.is_dir()
        for p in sub.iterdir() if _is_image(p)
    )
    if flat and nested:
        raise ExtractorError(f"{root} mixes bare images with category subfolders")
    if flat:
        entries = tuple(ImageEntry(i, p, None) for i, p in enumerate(flat))
        return ImageFolder(root, entries, ())
    if not nested:
        raise ExtractorError(f"no images under {root}")
    categories = tuple(sorted({name for name, _ in nested}))
    index = {name: i for i, name in enumerate(categories)}
    entries = tuple(ImageEntry(i, p, index[name]) for i, (name, p) in enumerate(nested))
    return ImageFolder(root, entries, categories)


def load_image(path: "str | Path") -> Image.Image:
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (OSError, Image.DecompressionBombError) as exc:
        raise ImageReadError(f"cannot decode {path}: {exc}") from exc


def _is_image(path: Path) -> bool:
    return path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES
