"""Exception types raised across the package."""


class QfSelectError(Exception):
    """Base class for all package errors."""


class ManifestError(QfSelectError):
    """Malformed manifest file."""


class DuplicateIdError(ManifestError):
    """An image_id appears more than once in a manifest."""


class LabelOutOfRangeError(ManifestError):
    """A ground-truth label is outside [0, num_classes)."""


class UnsupportedFormatError(QfSelectError):
    """Image file format is not PNG, PPM (P6), or baseline JPEG."""


class DecodeError(QfSelectError):
    """Image file could not be decoded (truncated or corrupt)."""


class MalformedStreamError(DecodeError):
    """JPEG byte stream violates the baseline format."""


class ShapeMismatchError(QfSelectError):
    """Two images passed to a metric have different shapes."""


class DuplicateKeyError(QfSelectError):
    """A (image_id, variant) key appears twice in a rank table file."""


class InvalidRankError(QfSelectError):
    """A rank entry is below 1."""


class MissingRankError(QfSelectError):
    """A required (image_id, variant) rank entry is absent."""


class DegenerateLabelsError(QfSelectError):
    """Classifier training requires at least two classes."""


class CoverageMismatchError(QfSelectError):
    """A selection log does not cover the manifest exactly once per image."""


class NoCandidateQfError(QfSelectError):
    """Selection attempted over an empty quality-factor set."""


class NoDataError(QfSelectError):
    """Report emission called with no points."""
