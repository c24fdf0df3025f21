"""JPEG Exif reader for the tags this pipeline needs.

Reads the APP1 Exif segment directly (both TIFF byte orders) and pulls
geolocation, camera direction, capture time, focal length, orientation
and pixel dimensions. Scope is deliberately bounded to IFD0, the Exif
sub-IFD and the GPS IFD; MakerNotes and everything else are ignored.

Exif capture times carry no timezone; they are treated as UTC here and
can be overridden per image through a sidecar file.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from datetime import datetime, timezone

from ..errors import DomainError, MalformedExif, MissingGeotag, NoExif
from ..geodesy import GeoCoord

SOI = 0xFFD8
APP1 = 0xFFE1
SOS = 0xFFDA
EOI = 0xFFD9
# SOF markers carrying frame dimensions (all except DHT/JPG/DAC gaps)
_SOF_MARKERS = {
    0xFFC0, 0xFFC1, 0xFFC2, 0xFFC3, 0xFFC5, 0xFFC6, 0xFFC7,
    0xFFC9, 0xFFCA, 0xFFCB, 0xFFCD, 0xFFCE, 0xFFCF,
}

# IFD0
_TAG_ORIENTATION = 0x0112
_TAG_EXIF_IFD = 0x8769
_TAG_GPS_IFD = 0x8825
# Exif sub-IFD
_TAG_DATETIME_ORIGINAL = 0x9003
_TAG_FOCAL_LENGTH = 0x920A
_TAG_PIXEL_X = 0xA002
_TAG_PIXEL_Y = 0xA003
_TAG_FOCAL_35MM = 0xA405
# GPS IFD
_TAG_GPS_LAT_REF = 0x0001
_TAG_GPS_LAT = 0x0002
_TAG_GPS_LON_REF = 0x0003
_TAG_GPS_LON = 0x0004
_TAG_GPS_ALT_REF = 0x0005
_TAG_GPS_ALT = 0x0006
_TAG_GPS_IMG_DIR_REF = 0x0010
_TAG_GPS_IMG_DIR = 0x0011

_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 7: 1, 9: 4, 10: 8}


@dataclass
class ImageRecord:
    """One photograph's metadata, as consumed by the rest of the pipeline."""

    image_id: str
    source_path: str
    width: int
    height: int
    geo: GeoCoord
    heading: float | None = None  # degrees clockwise from true north
    timestamp: datetime | None = None
    focal35: float | None = None  # 35mm-equivalent millimeters
    focal35_unscaled: bool = False  # True when only raw FocalLength was available
    orientation: int = 1

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DomainError(f"image dimensions must be positive, got {self.width}x{self.height}")
        if self.heading is not None and not 0 <= self.heading < 360:
            raise DomainError(f"heading {self.heading} outside [0, 360)")
        if not 1 <= self.orientation <= 8:
            raise DomainError(f"Exif orientation {self.orientation} outside 1-8")


def jpeg_dimensions(data: bytes) -> tuple[int, int]:
    """Pixel (width, height) from the first SOF frame header."""
    if len(data) < 4 or struct.unpack(">H", data[0:2])[0] != SOI:
        raise MalformedExif("not a JPEG (missing SOI marker)", offset=0)
    pos = 2
    while pos + 4 <= len(data):
        marker = struct.unpack(">H", data[pos:pos + 2])[0]
        if marker == EOI or (marker & 0xFF00) != 0xFF00:
            break
        length = struct.unpack(">H", data[pos + 2:pos + 4])[0]
        if marker in _SOF_MARKERS:
            if pos + 9 > len(data):
                raise MalformedExif("truncated SOF segment", offset=pos)
            h, w = struct.unpack(">HH", data[pos + 5:pos + 9])
            return w, h
        if marker == SOS:
            break
        pos += 2 + length
    raise MalformedExif("no SOF frame header found", offset=pos)


def parse_exif(
    jpeg_bytes: bytes, image_id: str = "", source_path: str = ""
) -> ImageRecord:
    """Build an ImageRecord from a JPEG's Exif metadata.

    Raises NoExif when no APP1 Exif segment exists, MissingGeotag when
    Exif is present without GPS latitude/longitude (the image remains
    usable if a sidecar supplies the location), and MalformedExif with a
    byte offset on truncation.
    """
    tiff, tiff_base = _find_exif_segment(jpeg_bytes)
    reader = _TiffReader(tiff, tiff_base)
    ifd0 = reader.read_ifd(reader.first_ifd_offset)

    exif_ifd = {}
    if _TAG_EXIF_IFD in ifd0:
        exif_ifd = reader.read_ifd(reader.scalar(ifd0[_TAG_EXIF_IFD]))
    gps_ifd = {}
    if _TAG_GPS_IFD in ifd0:
        gps_ifd = reader.read_ifd(reader.scalar(ifd0[_TAG_GPS_IFD]))

    lat = _gps_angle(reader, gps_ifd, _TAG_GPS_LAT, _TAG_GPS_LAT_REF, "S")
    lon = _gps_angle(reader, gps_ifd, _TAG_GPS_LON, _TAG_GPS_LON_REF, "W")
    if lat is None or lon is None:
        raise MissingGeotag("Exif present but no GPS latitude/longitude")

    alt = None
    if _TAG_GPS_ALT in gps_ifd:
        alt = reader.rational(gps_ifd[_TAG_GPS_ALT])
        if _TAG_GPS_ALT_REF in gps_ifd and reader.scalar(gps_ifd[_TAG_GPS_ALT_REF]) == 1:
            alt = -alt

    heading = None
    if _TAG_GPS_IMG_DIR in gps_ifd:
        heading = reader.rational(gps_ifd[_TAG_GPS_IMG_DIR]) % 360.0

    timestamp = None
    if _TAG_DATETIME_ORIGINAL in exif_ifd:
        timestamp = _parse_exif_datetime(reader.ascii(exif_ifd[_TAG_DATETIME_ORIGINAL]))

    focal35 = None
    unscaled = False
    if _TAG_FOCAL_35MM in exif_ifd:
        focal35 = float(reader.scalar(exif_ifd[_TAG_FOCAL_35MM]))
    elif _TAG_FOCAL_LENGTH in exif_ifd:
        focal35 = reader.rational(exif_ifd[_TAG_FOCAL_LENGTH])
        unscaled = True  # raw lens millimeters, not 35mm-equivalent

    orientation = 1
    if _TAG_ORIENTATION in ifd0:
        orientation = int(reader.scalar(ifd0[_TAG_ORIENTATION]))

    try:
        width, height = jpeg_dimensions(jpeg_bytes)
    except MalformedExif:
        if _TAG_PIXEL_X in exif_ifd and _TAG_PIXEL_Y in exif_ifd:
            width = int(reader.scalar(exif_ifd[_TAG_PIXEL_X]))
            height = int(reader.scalar(exif_ifd[_TAG_PIXEL_Y]))
        else:
            raise

    return ImageRecord(
        image_id=image_id,
        source_path=source_path,
        width=width,
        height=height,
        geo=GeoCoord(lat=lat, lon=lon, alt=alt),
        heading=heading,
        timestamp=timestamp,
        focal35=focal35,
        focal35_unscaled=unscaled,
        orientation=orientation,
    )


def _find_exif_segment(data: bytes) -> tuple[bytes, int]:
    if len(data) < 4 or struct.unpack(">H", data[0:2])[0] != SOI:
        raise NoExif("not a JPEG (missing SOI marker)")
    pos = 2
    while pos + 4 <= len(data):
        marker = struct.unpack(">H", data[pos:pos + 2])[0]
        if (marker & 0xFF00) != 0xFF00 or marker == EOI or marker == SOS:
            break
        length = struct.unpack(">H", data[pos + 2:pos + 4])[0]
        if length < 2 or pos + 2 + length > len(data):
            raise MalformedExif("segment length exceeds file", offset=pos)
        if marker == APP1 and data[pos + 4:pos + 10] == b"Exif\x00\x00":
            return data[pos + 10:pos + 2 + length], pos + 10
        pos += 2 + length
    raise NoExif("no APP1 Exif segment")


class _TiffReader:
    """Minimal TIFF structure reader over one Exif blob."""

    def __init__(self, blob: bytes, base_offset: int):
        self.blob = blob
        self.base = base_offset  # offset of the TIFF header in the JPEG, for messages
        if len(blob) < 8:
            raise MalformedExif("TIFF header truncated", offset=base_offset)
        order = blob[0:2]
        if order == b"II":
            self.endian = "<"
        elif order == b"MM":
            self.endian = ">"
        else:
            raise MalformedExif(f"bad TIFF byte order {order!r}", offset=base_offset)
        magic = self._unpack("H", 2)
        if magic != 42:
            raise MalformedExif(f"bad TIFF magic {magic}", offset=base_offset + 2)
        self.first_ifd_offset = self._unpack("I", 4)

    def _unpack(self, fmt: str, offset: int):
        size = struct.calcsize(fmt)
        if offset + size > len(self.blob):
            raise MalformedExif("read past end of Exif data", offset=self.base + offset)
        return struct.unpack(self.endian + fmt, self.blob[offset:offset + size])[0]

    def read_ifd(self, offset: int) -> dict[int, tuple[int, int, bytes]]:
        """Tag -> (type, count, raw value bytes)."""
        count = self._unpack("H", offset)
        entries = {}
        for i in range(count):
            base = offset + 2 + 12 * i
            tag = self._unpack("H", base)
            vtype = self._unpack("H", base + 2)
            vcount = self._unpack("I", base + 4)
            size = _TYPE_SIZES.get(vtype, 1) * vcount
            if size <= 4:
                value_off = base + 8
            else:
                value_off = self._unpack("I", base + 8)
            if value_off + size > len(self.blob):
                raise MalformedExif(
                    f"tag 0x{tag:04X} value out of bounds", offset=self.base + value_off
                )
            entries[tag] = (vtype, vcount, self.blob[value_off:value_off + size])
        return entries

    def scalar(self, entry: tuple[int, int, bytes]):
        vtype, _, raw = entry
        if vtype == 3:
            return struct.unpack(self.endian + "H", raw[:2])[0]
        if vtype == 4:
            return struct.unpack(self.endian + "I", raw[:4])[0]
        if vtype == 1:
            return raw[0]
        if vtype in (5, 10):
            return self.rational(entry)
        raise MalformedExif(f"unexpected scalar type {vtype}", offset=self.base)

    def rational(self, entry: tuple[int, int, bytes], index: int = 0):
        vtype, vcount, raw = entry
        if vtype not in (5, 10) or index >= vcount:
            raise MalformedExif("expected RATIONAL value", offset=self.base)
        fmt = "ii" if vtype == 10 else "II"
        num, den = struct.unpack(self.endian + fmt, raw[index * 8:index * 8 + 8])
        if den == 0:
            return 0.0
        return num / den

    def ascii(self, entry: tuple[int, int, bytes]) -> str:
        _, _, raw = entry
        return raw.split(b"\x00", 1)[0].decode("ascii", errors="replace")


def _gps_angle(reader, gps_ifd, tag, ref_tag, negative_ref) -> float | None:
    if tag not in gps_ifd:
        return None
    entry = gps_ifd[tag]
    deg = reader.rational(entry, 0)
    minutes = reader.rational(entry, 1) if entry[1] > 1 else 0.0
    seconds = reader.rational(entry, 2) if entry[1] > 2 else 0.0
    angle = deg + minutes / 60.0 + seconds / 3600.0
    if ref_tag in gps_ifd and reader.ascii(gps_ifd[ref_tag]).strip().upper() == negative_ref:
        angle = -angle
    return angle


def _parse_exif_datetime(text: str) -> datetime | None:
    try:
        return datetime.strptime(text.strip(), "%Y:%m:%d %H:%M:%S").replace(tzinfo=timezone.utc)
    except ValueError:
        return None


def horizontal_fov(focal35: float, width: int, height: int) -> float:
    """Horizontal field of view in degrees from a 35mm-equivalent focal length.

    The 36 mm full-frame dimension follows the image's longer axis: for
    portrait shots the focal length defines the vertical FOV and the
    horizontal FOV comes back through the aspect ratio.
    """
    if focal35 <= 0:
        raise DomainError(f"focal length must be positive, got {focal35}")
    long_half_angle = math.atan(18.0 / focal35)
    if height > width:  # portrait: long axis is vertical
        aspect = width / height
        return math.degrees(2 * math.atan(math.tan(long_half_angle) * aspect))
    return math.degrees(2 * long_half_angle)
