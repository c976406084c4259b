"""Exception hierarchy shared by all softjpeg modules."""


class SoftJpegError(Exception):
    """Base class for every error raised deliberately by this package."""


# bitstream layer
class JpegError(SoftJpegError):
    pass


class MalformedMarker(JpegError):
    pass


class UnsupportedFeature(JpegError):
    pass


class TruncatedStream(JpegError):
    pass


class HuffmanDecodeError(JpegError):
    pass


# priors / geometry
class TooFewBlocks(SoftJpegError):
    pass


class LayoutMismatch(SoftJpegError):
    pass


class DimensionMismatch(SoftJpegError):
    pass


class NonFiniteInput(SoftJpegError):
    pass


class InsufficientData(SoftJpegError):
    pass


class BadSigma(SoftJpegError):
    pass


class ConvergenceFailure(SoftJpegError):
    pass


# dictionary files
class DictFileError(SoftJpegError):
    pass


class BadMagic(DictFileError):
    pass


class VersionMismatch(DictFileError):
    pass


class CorruptPayload(DictFileError):
    pass


# solver
class DictMismatch(SoftJpegError):
    pass


class QpDivergence(SoftJpegError):
    pass
