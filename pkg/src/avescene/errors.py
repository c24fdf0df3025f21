"""Exception types shared across the package."""


class AveSceneError(Exception):
    """Base class for all avescene errors."""


class DomainError(AveSceneError, ValueError):
    """An argument violates a documented precondition."""


class ParseError(AveSceneError, ValueError):
    """A document could not be parsed; `path` points at the offending spot."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class NoExif(ParseError):
    """JPEG has no APP1 Exif segment."""


class MissingGeotag(ParseError):
    """Exif present, but no GPS latitude/longitude tags."""


class MalformedExif(ParseError):
    """Exif segment truncated or structurally invalid; `offset` is the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DegenerateFootprint(DomainError):
    """Footprint has fewer than 3 distinct vertices or zero area."""


class NonSimplePolygon(DomainError):
    """Polygon ring self-intersects."""


class EmptyTerrain(DomainError):
    """Terrain grid contains no usable (non-NODATA) cells."""


class NoElevation(DomainError):
    """Elevation query outside the grid extent or in a NODATA cell."""


class Unplaceable(AveSceneError):
    """Detection foot ray exits the scene without hitting any surface."""


class DanglingReference(AveSceneError, ValueError):
    """A record references an id that does not resolve in the scene."""


class SchemaVersionError(AveSceneError, ValueError):
    """Document schema version differs from the supported one."""

    def __init__(self, found, supported):
        super().__init__(
            f"unsupported schema version {found!r} (this build supports {supported!r})"
        )
        self.found = found
        self.supported = supported


class EncodeError(AveSceneError, ValueError):
    """Message body too large to frame."""
