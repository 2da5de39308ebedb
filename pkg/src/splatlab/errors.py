"""Exception hierarchy for splatlab.

Every failure mode raised by the library derives from :class:`SplatError`
so callers (and the CLI) can distinguish library errors from bugs.
"""


class SplatError(Exception):
    """Base class for all splatlab errors."""


class DecodeError(SplatError):
    """Gaussian parameters cannot be decoded (non-finite scale, bad quaternion)."""


class BehindCamera(SplatError):
    """Point is behind (or too close to) the z = 1 projection plane."""


class BehindTangentPlane(SplatError):
    """Point is behind the tangent plane of the projection direction."""


class DegenerateDirection(SplatError):
    """Direction vector has (near-)zero norm."""


class PolarSingularity(SplatError):
    """Frame rotation undefined: mean direction (anti)parallel to the y axis."""


class DegenerateSplat(SplatError):
    """2D covariance is not invertible after low-pass dilation."""


class DomainOverflow(SplatError):
    """Error-integral box leaves the valid (-pi/2, pi/2) region."""


class ConvergenceError(SplatError):
    """Quadrature self-check failed to converge to tolerance."""


class FisheyeOutOfDomain(SplatError):
    """Fisheye pixel maps beyond the angular radius pi."""


class ClassicUnsupportedCamera(SplatError):
    """Classic projection only supports the pinhole camera model."""


class DimensionMismatch(SplatError):
    """Images have different dimensions."""


class TooSmall(SplatError):
    """Image too small for the metric window."""


class MissingProperty(SplatError):
    """PLY file lacks a required vertex property."""


class TruncatedFile(SplatError):
    """File ends before the declared payload."""


class UnsupportedFormat(SplatError):
    """File format variant not supported."""


class NonOrthonormalRotation(SplatError):
    """Camera pose rotation is not orthonormal within tolerance."""


class UnknownModelTag(SplatError):
    """Camera record carries an unrecognized model tag."""
