"""Image folders to engine-ready feature files.

Each image becomes one record: augmented view pairs for the train split,
a single center view for database and query splits, encoded by a frozen
backbone and written in the engine's feature file byte format.
"""

from .backbones import BACKBONES, PixelProjection, VitClassToken, load_backbone
from .errors import ExtractorError, ImageReadError, WeightsUnavailableError
from .featurefile import file_size, label_bytes, write_features
from .folders import ImageEntry, ImageFolder, load_image, scan_folder
from .jobs import SPLITS, ExtractionJob, ExtractionSummary, run_extraction
from .views import DEFAULT_RECIPE, Recipe, as_array, augment_view, center_view, view_rng

__all__ = [
    "BACKBONES",
    "DEFAULT_RECIPE",
    "ExtractionJob",
    "ExtractionSummary",
    "ExtractorError",
    "ImageEntry",
    "ImageFolder",
    "ImageReadError",
    "PixelProjection",
    "Recipe",
    "SPLITS",
    "VitClassToken",
    "WeightsUnavailableError",
    "as_array",
    "augment_view",
    "center_view",
    "file_size",
    "label_bytes",
    "load_backbone",
    "load_image",
    "run_extraction",
    "scan_folder",
    "view_rng",
    "write_features",
]
