"""Errors raised by the extraction pipeline."""


class ExtractorError(Exception):
    """Base class for extraction failures."""


class ImageReadError(ExtractorError):
    """An image file exists but cannot be decoded."""


class WeightsUnavailableError(ExtractorError):
    """A pretrained backbone was requested but its checkpoint is not on disk."""
