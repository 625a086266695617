"""Exception types raised across the package.

Every error that callers are expected to handle derives from GQError so the
CLI can map any failure to a single machine-readable envelope.
"""


class GQError(Exception):
    """Base class for all errors raised by this package."""

    @property
    def code(self) -> str:
        return type(self).__name__


# -- quantizer math ---------------------------------------------------------

class InvalidBitDepth(GQError):
    """Bit depth outside the supported 1..8 range."""


class InvalidMu(GQError):
    """Non-positive nonlinearity factor."""


class InvalidSchedule(GQError):
    """Degenerate annealing ramp (zero or negative step span)."""


class EmptyInput(GQError):
    """Empty weight or centroid input where at least one element is required."""


class NonDifferentiablePoint(GQError):
    """Derivative requested exactly at a centroid, where |w - z| has a kink."""


class DegenerateTensor(GQError):
    """Constant tensor: the nonlinearity fit has no meaningful objective."""


class InvalidTensor(GQError):
    """Tensor containing NaN or Inf values."""


# -- containers -------------------------------------------------------------

class IoError(GQError):
    """Underlying filesystem failure while reading or writing a container."""


class FormatError(GQError):
    """Unrecognized magic bytes or unsupported format version."""


class CorruptFile(GQError):
    """Structurally invalid container contents (bad directory, truncation)."""


class CorruptStream(GQError):
    """Packed index stream with wrong length or nonzero padding bits."""


class IndexOverflow(GQError):
    """Index does not fit in the requested bit width."""


# -- trainer / analysis -----------------------------------------------------

class InvalidTask(GQError):
    """Unknown synthetic task name."""


class TrainingDiverged(GQError):
    """Loss became NaN during training."""


class ShapeError(GQError):
    """Mismatched tensor shapes."""
