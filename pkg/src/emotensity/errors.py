"""Exception hierarchy shared across the toolkit.

Validation problems (bad arguments, violated domain invariants, malformed
configs) raise ValidationError; malformed contents of input files raise
DataFormatError. The CLI maps ValidationError/DataFormatError to exit code 1
and OS-level I/O failures to exit code 2.
"""


class EmotensityError(Exception):
    """Base class for all toolkit errors."""


class DataFormatError(EmotensityError):
    """An input file has syntactically or semantically malformed content."""


class ValidationError(EmotensityError):
    """An argument, record, or state violates a documented invariant."""


class ConfigError(ValidationError):
    """An experiment or campaign configuration is inconsistent."""


class MetricError(ValidationError):
    """A correlation metric is undefined for the given series."""
