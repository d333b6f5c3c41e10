"""Exception hierarchy shared by all solver modules."""


class CPSchwarzError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(CPSchwarzError, ValueError):
    pass


# geometry
class MedialAxisPoint(CPSchwarzError):
    """Query point sits on a singularity of the closest point map."""


class OffSurface(CPSchwarzError):
    pass


class EmptyMesh(CPSchwarzError):
    pass


class MeshFormatError(CPSchwarzError):
    pass


# band
class TubeTooWide(CPSchwarzError):
    """Tube radius exceeds the reach of the closest point map."""


class StencilIncomplete(CPSchwarzError):
    pass


class SeedOffTube(CPSchwarzError):
    pass


# linalg
class DimensionMismatch(CPSchwarzError, ValueError):
    pass


class SingularMatrix(CPSchwarzError):
    pass


class Breakdown(CPSchwarzError):
    pass


# partition
class TooManyParts(CPSchwarzError):
    pass


class LabelOutOfRange(CPSchwarzError):
    pass


class WrongLength(CPSchwarzError):
    pass


# subdomain
class EmptySubdomain(CPSchwarzError):
    pass


class OverlapExceedsDomain(CPSchwarzError):
    pass


class StencilEscapesSubdomain(CPSchwarzError):
    pass


class SingularLocal(SingularMatrix):
    pass


class SingularBlock(SingularMatrix):
    pass


# schwarz
class Diverged(CPSchwarzError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
