"""Shared test helpers: reference Exif fixture writer and a Vincenty
geodesic oracle, both independent of the package implementation."""

from __future__ import annotations

import io
import math

from PIL import Image
from PIL.TiffImagePlugin import IFDRational


def _deg_to_dms_rationals(value: float):
    value = abs(value)
    deg = int(value)
    minutes_f = (value - deg) * 60
    minutes = int(minutes_f)
    seconds = round((minutes_f - minutes) * 3600 * 10000)
    return (
        IFDRational(deg, 1),
        IFDRational(minutes, 1),
        IFDRational(seconds, 10000 * 60),
    )


def write_geotagged_jpeg(
    lat: float,
    lon: float,
    *,
    size=(640, 480),
    alt: float | None = None,
    heading: float | None = None,
    focal35: int | None = None,
    focal_mm: float | None = None,
    datetime_original: str | None = None,
    orientation: int = 1,
    color=(90, 120, 40),
) -> bytes:
    """Write a JPEG with GPS Exif via Pillow (the independent reference writer)."""
    img = Image.new("RGB", size, color)
    exif = Image.Exif()
    exif[0x0112] = orientation

    eifd = exif.get_ifd(0x8769)
    eifd[0xA002] = size[0]
    eifd[0xA003] = size[1]
    if datetime_original:
        eifd[0x9003] = datetime_original
    if focal35 is not None:
        eifd[0xA405] = focal35
    if focal_mm is not None:
        eifd[0x920A] = IFDRational(int(round(focal_mm * 100)), 100)

    gps = exif.get_ifd(0x8825)
    gps[1] = "N" if lat >= 0 else "S"
    gps[2] = _deg_to_dms_rationals(lat)
    gps[3] = "E" if lon >= 0 else "W"
    gps[4] = _deg_to_dms_rationals(lon)
    if alt is not None:
        gps[5] = 0 if alt >= 0 else 1
        gps[6] = IFDRational(int(round(abs(alt) * 100)), 100)
    if heading is not None:
        gps[16] = "T"
        gps[17] = IFDRational(int(round(heading * 100)), 100)

    buf = io.BytesIO()
    img.save(buf, format="JPEG", exif=exif, quality=85)
    return buf.getvalue()


def plain_jpeg(size=(320, 240), color=(10, 20, 30)) -> bytes:
    """JPEG with no APP1 Exif segment at all."""
    img = Image.new("RGB", size, color)
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=85)
    return buf.getvalue()


def vincenty_distance(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """WGS84 inverse geodesic (Vincenty). Oracle for perimeter checks."""
    a = 6378137.0
    f = 1 / 298.257223563
    b = (1 - f) * a

    u1 = math.atan((1 - f) * math.tan(math.radians(lat1)))
    u2 = math.atan((1 - f) * math.tan(math.radians(lat2)))
    ll = math.radians(lon2 - lon1)
    lam = ll
    sin_u1, cos_u1 = math.sin(u1), math.cos(u1)
    sin_u2, cos_u2 = math.sin(u2), math.cos(u2)

    for _ in range(200):
        sin_lam, cos_lam = math.sin(lam), math.cos(lam)
        sin_sigma = math.hypot(
            cos_u2 * sin_lam, cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lam
        )
        if sin_sigma == 0:
            return 0.0
        cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lam
        sigma = math.atan2(sin_sigma, cos_sigma)
        sin_alpha = cos_u1 * cos_u2 * sin_lam / sin_sigma
        cos2_alpha = 1 - sin_alpha**2
        cos_2sm = cos_sigma - 2 * sin_u1 * sin_u2 / cos2_alpha if cos2_alpha else 0.0
        c = f / 16 * cos2_alpha * (4 + f * (4 - 3 * cos2_alpha))
        lam_prev = lam
        lam = ll + (1 - c) * f * sin_alpha * (
            sigma + c * sin_sigma * (cos_2sm + c * cos_sigma * (-1 + 2 * cos_2sm**2))
        )
        if abs(lam - lam_prev) < 1e-13:
            break

    u_sq = cos2_alpha * (a**2 - b**2) / b**2
    big_a = 1 + u_sq / 16384 * (4096 + u_sq * (-768 + u_sq * (320 - 175 * u_sq)))
    big_b = u_sq / 1024 * (256 + u_sq * (-128 + u_sq * (74 - 47 * u_sq)))
    delta_sigma = big_b * sin_sigma * (
        cos_2sm
        + big_b / 4 * (
            cos_sigma * (-1 + 2 * cos_2sm**2)
            - big_b / 6 * cos_2sm * (-3 + 4 * sin_sigma**2) * (-3 + 4 * cos_2sm**2)
        )
    )
    return b * big_a * (sigma - delta_sigma)
