"""Exception taxonomy shared by all pipeline stages.

Every error raised on purpose derives from Sar2NdwiError so the CLI can
catch one base class and exit with a category-prefixed message.
"""


class Sar2NdwiError(Exception):
    """Base class for all pipeline errors."""


class DimensionError(Sar2NdwiError):
    """Raster shapes disagree or are not the required size."""


class NonFiniteError(Sar2NdwiError):
    """An input array contains NaN or infinity."""


class NegativeRadianceError(Sar2NdwiError):
    """Optical band values must be non-negative."""


class ScaleError(Sar2NdwiError):
    """Index map is on the wrong scale for the requested operation."""


class BinCountError(Sar2NdwiError):
    """Histogram needs at least two bins."""


class DegenerateHistogramError(Sar2NdwiError):
    """Thresholding needs at least two populated bins."""


class EmptyDatasetError(Sar2NdwiError):
    """No usable records to split or iterate."""


class MissingChipError(Sar2NdwiError):
    """A manifest entry has no chip file on disk."""


class ConfigError(Sar2NdwiError):
    """Inconsistent or missing configuration."""


class ShapeError(Sar2NdwiError):
    """Array shape incompatible with the network."""


class DivergenceError(Sar2NdwiError):
    """Training loss became non-finite."""


class FormatError(Sar2NdwiError):
    """A binary file is malformed, truncated, or of the wrong version."""


class SingleClassError(Sar2NdwiError):
    """ROC analysis needs both positive and negative labels."""


class ZeroVarianceError(Sar2NdwiError):
    """Coefficient of determination is undefined for constant truth."""
