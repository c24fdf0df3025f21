"""WGS84 geodetic -> UTM -> anchor-relative local frame conversions.

The local frame is right-handed ENU: x east, y north, z up, in meters
relative to a single anchor point per scene. UTM conversion uses the
Krueger series in the third flattening to 6th order, which is accurate to
well under a millimeter over a full UTM zone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

# WGS84 ellipsoid
WGS84_A = 6378137.0
WGS84_F = 1 / 298.257223563
WGS84_E2 = WGS84_F * (2 - WGS84_F)
_E = math.sqrt(WGS84_E2)

UTM_SCALE = 0.9996
FALSE_EASTING = 500000.0
FALSE_NORTHING_SOUTH = 10000000.0

# Third flattening n = f / (2 - f) and the rectifying radius A.
_N = WGS84_F / (2 - WGS84_F)
_A_RECT = WGS84_A / (1 + _N) * (1 + _N**2 / 4 + _N**4 / 64 + _N**6 / 256)

# Krueger series coefficients, 6th order in n.
_ALPHA = (
    _N / 2 - 2 * _N**2 / 3 + 5 * _N**3 / 16 + 41 * _N**4 / 180
    - 127 * _N**5 / 288 + 7891 * _N**6 / 37800,
    13 * _N**2 / 48 - 3 * _N**3 / 5 + 557 * _N**4 / 1440 + 281 * _N**5 / 630
    - 1983433 * _N**6 / 1935360,
    61 * _N**3 / 240 - 103 * _N**4 / 140 + 15061 * _N**5 / 26880
    + 167603 * _N**6 / 181440,
    49561 * _N**4 / 161280 - 179 * _N**5 / 168 + 6601661 * _N**6 / 7257600,
    34729 * _N**5 / 80640 - 3418889 * _N**6 / 1995840,
    212378941 * _N**6 / 319334400,
)
_BETA = (
    _N / 2 - 2 * _N**2 / 3 + 37 * _N**3 / 96 - _N**4 / 360
    - 81 * _N**5 / 512 + 96199 * _N**6 / 604800,
    _N**2 / 48 + _N**3 / 15 - 437 * _N**4 / 1440 + 46 * _N**5 / 105
    - 1118711 * _N**6 / 3870720,
    17 * _N**3 / 480 - 37 * _N**4 / 840 - 209 * _N**5 / 4480
    + 5569 * _N**6 / 90720,
    4397 * _N**4 / 161280 - 11 * _N**5 / 504 - 830251 * _N**6 / 7257600,
    4583 * _N**5 / 161280 - 108847 * _N**6 / 3991680,
    20648693 * _N**6 / 638668800,
)


@dataclass(frozen=True)
class GeoCoord:
    """Geodetic WGS84 coordinate in degrees; altitude in meters, optional."""

    lat: float
    lon: float
    alt: float | None = None

    def __post_init__(self):
        if not -90 <= self.lat <= 90:
            raise DomainError(f"latitude {self.lat} outside [-90, 90]")
        if not -180 <= self.lon <= 180:
            raise DomainError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class UtmCoord:
    zone: int
    hemisphere: str  # "north" | "south"
    easting: float
    northing: float

    def __post_init__(self):
        if not 1 <= self.zone <= 60:
            raise DomainError(f"UTM zone {self.zone} outside 1-60")
        if self.hemisphere not in ("north", "south"):
            raise DomainError(f"hemisphere must be north|south, got {self.hemisphere!r}")
        if not 0 < self.easting < 1000000:
            raise DomainError(f"easting {self.easting} outside (0, 1000000)")
        if not 0 <= self.northing <= 10000000:
            raise DomainError(f"northing {self.northing} outside [0, 10000000]")


@dataclass(frozen=True)
class LocalFrame:
    """Anchor of the scene's local ENU frame.

    All scene coordinates are meters relative to `anchor`; z is meters
    above `base_elevation`, which is the knob reconciling GPS altitudes
    with whatever vertical datum the terrain data uses.
    """

    anchor: UtmCoord
    anchor_geo: GeoCoord
    base_elevation: float = 0.0


@dataclass(frozen=True)
class LocalCoord:
    """Meters east/north/up of the frame anchor (right-handed ENU)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise DomainError("local coordinate must be finite")


def zone_for(lon: float, lat: float) -> int:
    """Standard 6-degree UTM zone for a longitude.

    Norway/Svalbard exceptions are deliberately not applied: scenes here
    are single-site and the exceptions only add untestable branches.
    """
    if not -180 <= lon < 180:
        raise DomainError(f"longitude {lon} outside [-180, 180)")
    zone = int(math.floor((lon + 180) / 6)) + 1
    return min(max(zone, 1), 60)


def central_meridian(zone: int) -> float:
    return (zone - 1) * 6 - 180 + 3


def latlon_to_utm(p: GeoCoord, force_zone: int | None = None) -> UtmCoord:
    """Project a geodetic coordinate to UTM (Krueger series, 6th order)."""
    if not -80 < p.lat < 84:
        raise DomainError(f"latitude {p.lat} outside UTM validity band (-80, 84)")
    lon = p.lon if p.lon < 180 else p.lon - 360
    zone = force_zone if force_zone is not None else zone_for(lon, p.lat)

    phi = math.radians(p.lat)
    lam = math.radians(lon - central_meridian(zone))

    # tan of the conformal latitude (exact closed form)
    t = math.sinh(math.asinh(math.tan(phi)) - _E * math.atanh(_E * math.sin(phi)))
    xi = math.atan2(t, math.cos(lam))
    eta = math.asinh(math.sin(lam) / math.hypot(t, math.cos(lam)))

    xi_s, eta_s = xi, eta
    for j, a in enumerate(_ALPHA, start=1):
        xi_s += a * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        eta_s += a * math.cos(2 * j * xi) * math.sinh(2 * j * eta)

    easting = FALSE_EASTING + UTM_SCALE * _A_RECT * eta_s
    northing = UTM_SCALE * _A_RECT * xi_s
    hemisphere = "north" if p.lat >= 0 else "south"
    if hemisphere == "south":
        northing += FALSE_NORTHING_SOUTH
    return UtmCoord(zone=zone, hemisphere=hemisphere, easting=easting, northing=northing)


def utm_to_latlon(p: UtmCoord) -> GeoCoord:
    """Inverse projection (Krueger series plus Newton on the latitude)."""
    y = p.northing - (FALSE_NORTHING_SOUTH if p.hemisphere == "south" else 0.0)
    xi = y / (UTM_SCALE * _A_RECT)
    eta = (p.easting - FALSE_EASTING) / (UTM_SCALE * _A_RECT)

    xi_p, eta_p = xi, eta
    for j, b in enumerate(_BETA, start=1):
        xi_p -= b * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        eta_p -= b * math.cos(2 * j * xi) * math.sinh(2 * j * eta)

    # tan of conformal latitude, then Newton back to geodetic
    tau_p = math.sin(xi_p) / math.hypot(math.sinh(eta_p), math.cos(xi_p))
    tau = tau_p
    for _ in range(8):
        sigma = math.sinh(_E * math.atanh(_E * tau / math.hypot(1.0, tau)))
        f_tau = tau * math.hypot(1.0, sigma) - sigma * math.hypot(1.0, tau) - tau_p
        d_tau = (
            (math.hypot(1.0, sigma) * math.hypot(1.0, tau) - sigma * tau)
            * (1 - WGS84_E2)
            * math.hypot(1.0, tau)
            / (1 + (1 - WGS84_E2) * tau * tau)
        )
        step = f_tau / d_tau
        tau -= step
        if abs(step) < 1e-16 * max(1.0, abs(tau)):
            break

    lat = math.degrees(math.atan(tau))
    lon = central_meridian(p.zone) + math.degrees(math.atan2(math.sinh(eta_p), math.cos(xi_p)))
    return GeoCoord(lat=lat, lon=lon)


def utm_to_local(p: UtmCoord, frame: LocalFrame, z: float = 0.0) -> LocalCoord:
    """Translate a UTM coordinate into the frame's ENU meters.

    Cross-zone (or cross-hemisphere) input is rejected rather than
    reprojected: silently reprojecting hides errors in single-site scenes.
    """
    if p.zone != frame.anchor.zone:
        raise DomainError(
            f"zone mismatch: point is in zone {p.zone}, frame anchored in zone {frame.anchor.zone}"
        )
    if p.hemisphere != frame.anchor.hemisphere:
        raise DomainError(
            f"hemisphere mismatch: point {p.hemisphere}, frame {frame.anchor.hemisphere}"
        )
    return LocalCoord(
        x=p.easting - frame.anchor.easting,
        y=p.northing - frame.anchor.northing,
        z=z,
    )


def local_to_utm(p: LocalCoord, frame: LocalFrame) -> UtmCoord:
    return UtmCoord(
        zone=frame.anchor.zone,
        hemisphere=frame.anchor.hemisphere,
        easting=frame.anchor.easting + p.x,
        northing=frame.anchor.northing + p.y,
    )


def geo_to_local(p: GeoCoord, frame: LocalFrame, z: float = 0.0) -> LocalCoord:
    """Convenience composition used by every ingest path."""
    return utm_to_local(latlon_to_utm(p, force_zone=frame.anchor.zone), frame, z=z)


def make_frame(anchor_geo: GeoCoord, base_elevation: float = 0.0) -> LocalFrame:
    return LocalFrame(
        anchor=latlon_to_utm(anchor_geo),
        anchor_geo=anchor_geo,
        base_elevation=base_elevation,
    )
