"""Exception types shared across the package."""


class WeakaggError(Exception):
    """Base class for every error this package raises on purpose."""


class ShapeError(WeakaggError):
    """Operand dimensions are inconsistent."""


class NumericError(WeakaggError):
    """A computation produced or received a non-finite value."""


class ParseError(WeakaggError):
    """A folder name or file field does not match its expected pattern."""


class FormatError(WeakaggError):
    """A file does not follow its documented layout."""


class RangeError(WeakaggError):
    """A value lies outside its documented range."""


class DuplicateEntryError(WeakaggError):
    """The same key appears twice where it must be unique."""


class EmptyBagError(WeakaggError):
    """A bag ended up with zero frames."""


class UndefinedMetricError(WeakaggError):
    """The metric is undefined for this input (e.g. zero variance)."""


class InsufficientDataError(WeakaggError):
    """Not enough samples to perform the requested split or fit."""


class UnknownPersonError(WeakaggError):
    """A referenced person ID does not exist in the corpus."""


class ConfigError(WeakaggError):
    """Configuration values are invalid or incompatible."""


class IntegrityError(WeakaggError):
    """Stored data is internally inconsistent (e.g. tampered checkpoint)."""
