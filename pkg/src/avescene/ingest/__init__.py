"""Parsers turning external data into domain records.

Every parser here consumes bytes or text, never sockets, so the whole
test suite runs offline from fixtures. The one network call in the
package (the Overpass fetch) lives behind `fetch_overpass` and is only
exercised by the CLI.
"""

from .exif import ImageRecord, horizontal_fov, jpeg_dimensions, parse_exif
from .overpass import (
    DEFAULT_BUILDING_HEIGHT,
    METERS_PER_LEVEL,
    BuildingFootprint,
    building_height,
    fetch_overpass,
    parse_overpass,
)
from .sidecar import apply_sidecar, load_sidecar, sidecar_path_for
from .terrain import TerrainGrid, parse_terrain, sample_elevation

__all__ = [
    "ImageRecord",
    "horizontal_fov",
    "jpeg_dimensions",
    "parse_exif",
    "BuildingFootprint",
    "building_height",
    "fetch_overpass",
    "parse_overpass",
    "METERS_PER_LEVEL",
    "DEFAULT_BUILDING_HEIGHT",
    "TerrainGrid",
    "parse_terrain",
    "sample_elevation",
    "apply_sidecar",
    "load_sidecar",
    "sidecar_path_for",
]
