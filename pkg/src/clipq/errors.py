"""Exception hierarchy shared across the engine."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(EngineError):
    """Shapes or dimensions of inputs/parameters are inconsistent."""


class NonFiniteError(EngineError):
    """A NaN or infinity showed up where only finite values are allowed."""


class ZeroNormError(EngineError):
    """A vector that must have positive norm is (numerically) zero."""


class BatchTooSmallError(EngineError):
    """A contrastive batch needs at least two items (four view rows)."""


class ClippingExhaustedError(EngineError):
    """eta would drop every negative score; at least one must survive."""


class EmptyDatasetError(EngineError):
    """An operation received a dataset or database with no items."""


class FormatError(EngineError):
    """Base class for on-disk format violations."""


class MagicError(FormatError):
    """File does not start with the expected magic bytes."""


class VersionError(FormatError):
    """File carries a format version this build does not understand."""


class TruncationError(FormatError):
    """File is shorter (or longer) than its header implies."""


class ChecksumError(FormatError):
    """Stored content checksum does not match the payload."""


class VocabularyError(EngineError):
    """Label sets from different vocabularies were compared or mixed."""
