"""Best-worst-scaling annotation and cross-lingual emotion intensity regression toolkit."""

from emotensity.errors import ConfigError, DataFormatError, EmotensityError, MetricError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "EmotensityError",
    "DataFormatError",
    "ValidationError",
    "ConfigError",
    "MetricError",
    "__version__",
]
