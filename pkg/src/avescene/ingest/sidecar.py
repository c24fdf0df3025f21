"""Per-image sidecar metadata files.

A sidecar can supply or override any ImageRecord field, which keeps
fully synthetic test fixtures possible without crafting binary Exif and
gives operators a place to correct bad phone metadata. Schema:

    {
      "schema_version": 1,
      "image": {
        "lat": 51.5, "lon": -0.12, "alt": 31.0,
        "heading": 245.0,
        "timestamp": "2023-06-01T12:00:00Z",
        "focal35": 28.0,
        "width": 4032, "height": 3024,
        "orientation": 1
      }
    }

All keys inside "image" are optional; unknown keys are rejected.
"""

from __future__ import annotations

from pathlib import Path

from ..errors import ParseError, SchemaVersionError
from ..geodesy import GeoCoord
from .. import jsonio
from .exif import ImageRecord

SIDECAR_SCHEMA_VERSION = 1

_ALLOWED = {
    "lat", "lon", "alt", "heading", "timestamp",
    "focal35", "width", "height", "orientation",
}


def sidecar_path_for(image_path: str | Path, sidecar_dir: str | Path | None = None) -> Path:
    image_path = Path(image_path)
    directory = Path(sidecar_dir) if sidecar_dir else image_path.parent
    return directory / (image_path.stem + ".json")


def load_sidecar(path: str | Path) -> dict:
    doc = jsonio.loads(Path(path).read_text(), what=f"sidecar {path}")
    if not isinstance(doc, dict):
        raise ParseError("sidecar must be a JSON object", path="$")
    version = doc.get("schema_version")
    if version != SIDECAR_SCHEMA_VERSION:
        raise SchemaVersionError(version, SIDECAR_SCHEMA_VERSION)
    image = doc.get("image", {})
    if not isinstance(image, dict):
        raise ParseError("'image' must be an object", path="$.image")
    unknown = set(image) - _ALLOWED
    if unknown:
        raise ParseError(f"unknown sidecar fields {sorted(unknown)}", path="$.image")
    return image


def apply_sidecar(
    record: ImageRecord | None,
    overrides: dict,
    image_id: str,
    source_path: str,
    width: int | None = None,
    height: int | None = None,
) -> ImageRecord:
    """Merge sidecar overrides over an Exif-derived record.

    With `record` None (image had no usable Exif) the sidecar must carry
    lat/lon; pixel dimensions then come from the JPEG itself via
    `width`/`height` unless the sidecar overrides them.
    """
    base = {
        "lat": record.geo.lat if record else None,
        "lon": record.geo.lon if record else None,
        "alt": record.geo.alt if record else None,
        "heading": record.heading if record else None,
        "timestamp": record.timestamp if record else None,
        "focal35": record.focal35 if record else None,
        "width": record.width if record else width,
        "height": record.height if record else height,
        "orientation": record.orientation if record else 1,
    }
    merged = dict(base)
    for key, value in overrides.items():
        merged[key] = jsonio.parse_timestamp(value) if key == "timestamp" else value

    if merged["lat"] is None or merged["lon"] is None:
        raise ParseError(
            f"image {image_id!r} has no geotag and the sidecar does not supply lat/lon"
        )
    if merged["width"] is None or merged["height"] is None:
        raise ParseError(f"image {image_id!r} has no pixel dimensions available")

    return ImageRecord(
        image_id=image_id,
        source_path=source_path,
        width=int(merged["width"]),
        height=int(merged["height"]),
        geo=GeoCoord(
            lat=float(merged["lat"]),
            lon=float(merged["lon"]),
            alt=None if merged["alt"] is None else float(merged["alt"]),
        ),
        heading=None if merged["heading"] is None else float(merged["heading"]) % 360.0,
        timestamp=merged["timestamp"],
        focal35=None if merged["focal35"] is None else float(merged["focal35"]),
        focal35_unscaled=bool(record.focal35_unscaled) if record and "focal35" not in overrides else False,
        orientation=int(merged["orientation"]),
    )
