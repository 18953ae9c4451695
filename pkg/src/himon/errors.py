"""Exception taxonomy shared by all himon modules."""


class HimonError(Exception):
    """Base class for all himon errors."""


class DimensionError(HimonError):
    """Array shape does not match what an operation requires."""


class NumericalError(HimonError):
    """A public operation produced or received non-finite values."""


class InsufficientDataError(HimonError):
    """Not enough samples/windows to fit or calibrate."""


class ConfigurationError(HimonError):
    """Invalid or inconsistent configuration (bad keys, weights, sensor sets)."""


class DataError(HimonError):
    """Runtime data problem: missing sensors, length mismatch, non-finite reading."""


class ParseError(DataError):
    """Malformed input file; message carries the offending line number."""


class ModelFormatError(HimonError):
    """Model file is corrupt, truncated, or incompatible with the configuration."""


class SetupError(HimonError):
    """Engine could not be constructed (e.g. missing pretrained weights)."""


class TrainingError(HimonError):
    """Training could not produce a usable model."""
