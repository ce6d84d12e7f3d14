"""Exception hierarchy shared by all airybeamlab modules."""


class BeamLabError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(BeamLabError):
    """Point, region, or receiver placement violates the scene geometry."""


class SamplingError(BeamLabError):
    """Grid step exceeds the half-wavelength sampling limit."""


class ParameterError(BeamLabError):
    """Beam or codebook parameter outside its admissible range."""


class UnsupportedSceneError(BeamLabError):
    """Free-space oracle invoked on a scene that contains obstacles."""


class InputError(BeamLabError):
    """Runtime input (pattern, probabilities, ...) malformed or non-finite."""


class ConfigMismatchError(BeamLabError):
    """Configuration, manifest, or method name inconsistent with the data."""


class FormatError(BeamLabError):
    """Base class for binary file format violations."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class BadVersionError(FormatError):
    """File format version is not supported."""


class BadShapeError(FormatError):
    """Tensor table, header fields, or record layout inconsistent."""


class NonFiniteTensorError(FormatError):
    """A stored tensor or record contains NaN or Inf."""


class TruncatedFileError(FormatError):
    """File ends before the declared payload is complete."""


class LabelBoundsError(FormatError):
    """Stored codeword label lies outside the codebook dimensions."""
