"""Exception hierarchy shared across the package."""


class MetaSRError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(MetaSRError, ValueError):
    pass


class GraphError(MetaSRError, RuntimeError):
    """Misuse of the autodiff graph (non-scalar loss, repeated backward, ...)."""


class MissingGradientError(MetaSRError, RuntimeError):
    def __init__(self, name: str):
        super().__init__(f"parameter {name!r} has no gradient")
        self.name = name


class CheckpointError(MetaSRError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ImageFormatError(MetaSRError):
    """Unsupported or malformed image container."""


class TruncatedImageError(ImageFormatError):
    pass


class ConfigError(MetaSRError, ValueError):
    pass


class DataError(MetaSRError):
    """Dataset problems: empty directories, images too small for the patch policy."""
