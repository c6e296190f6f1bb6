"""Exception taxonomy.

Grouped by the CLI exit-code classes: config (2), data (3), model (4).
"""


class ClaimcheckError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ClaimcheckError):
    """Invalid or unusable run configuration."""


# --- data errors (exit code 3) -------------------------------------------

class DataError(ClaimcheckError):
    """Base class for input-data errors."""


class ParseError(DataError):
    """Malformed manifest or cache file."""


class ValidationError(DataError):
    """Structurally valid input violating a documented invariant."""


class DecodeError(DataError):
    """Image file could not be decoded."""


class TooSmallError(DataError):
    """Image below the 16x16 minimum."""


class DegenerateLandmarksError(DataError):
    """Five-point landmarks are coincident/collinear; transform rank-deficient."""


class EmptyRegionError(DataError):
    """A face-luminance triangle rasterized to zero pixels."""


class TooFewSamplesError(DataError):
    """Not enough images/identities for the requested statistic."""


class LabelCountError(DataError):
    """Score partitioning requires exactly two distinct labels."""


class EmptySampleError(DataError):
    """A score sample required to be non-empty was empty."""


class DegenerateVarianceError(DataError):
    """A statistic is undefined because a sample has zero variance."""


class DescriptorMismatchError(DataError):
    """Embeddings from different descriptors cannot be compared."""


class UnavailableMetricError(DataError):
    """A quality metric needed for sorting/correlation is unavailable."""

    def __init__(self, metric: str, missing_ids: list[str]):
        self.metric = metric
        self.missing_ids = list(missing_ids)
        ids = ", ".join(self.missing_ids)
        super().__init__(f"metric {metric!r} unavailable for: {ids}")


# --- model errors (exit code 4) -------------------------------------------

class ModelError(ClaimcheckError):
    """Base class for descriptor/classifier model errors."""


class ModelLoadError(ModelError):
    """Model file missing, unreadable, or outside the supported op subset."""


class ShapeMismatchError(ModelError):
    """Model output shape disagrees with its declared spec."""


class InferenceError(ModelError):
    """Model execution failed on a valid input."""


class ZeroVectorError(InferenceError):
    """Embedding degenerated to the zero vector (uniform baseline input)."""


class ClassifierIOError(ModelError):
    """Aux classifier failed to run or violated its output spec."""
