"""Overpass building responses -> footprints, plus the one live fetch."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from ..errors import ParseError
from ..geodesy import GeoCoord
from .. import jsonio

logger = logging.getLogger(__name__)

METERS_PER_LEVEL = 3.0  # common OSM convention
DEFAULT_BUILDING_HEIGHT = 8.0

_HEIGHT_RE = re.compile(r"^\s*(-?\d+(?:\.\d+)?)\s*(?:m|meters?)?\s*$", re.IGNORECASE)


@dataclass
class BuildingFootprint:
    osm_id: int
    ring: list[GeoCoord]  # closed way with the duplicate closing vertex removed
    height_m: float | None = None
    levels: float | None = None
    name: str | None = None


def parse_overpass(body: str | bytes | dict) -> list[BuildingFootprint]:
    """Extract building footprints from Overpass JSON (geometry-expanded form).

    Keeps only closed ways carrying a building tag. Ways with fewer than 3
    distinct vertices are skipped with a warning, never fatally.
    """
    doc = body if isinstance(body, dict) else jsonio.loads(body, what="Overpass response")
    if not isinstance(doc, dict) or "elements" not in doc:
        raise ParseError("missing 'elements' array", path="$")
    elements = doc["elements"]
    if not isinstance(elements, list):
        raise ParseError("'elements' is not an array", path="$.elements")

    footprints: list[BuildingFootprint] = []
    for i, el in enumerate(elements):
        path = f"$.elements[{i}]"
        if not isinstance(el, dict):
            raise ParseError("element is not an object", path=path)
        if el.get("type") != "way":
            continue
        tags = el.get("tags") or {}
        building = tags.get("building")
        if not building or building == "no":
            continue
        geometry = el.get("geometry")
        if not isinstance(geometry, list):
            logger.warning("way %s has no geometry (need 'out geom' form); skipped", el.get("id"))
            continue

        try:
            ring = [GeoCoord(lat=float(n["lat"]), lon=float(n["lon"])) for n in geometry]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad node coordinate: {exc}", path=f"{path}.geometry") from exc

        if len(ring) < 2 or (ring[0].lat, ring[0].lon) != (ring[-1].lat, ring[-1].lon):
            logger.warning("way %s is not a closed ring; skipped", el.get("id"))
            continue
        ring = ring[:-1]
        distinct = {(p.lat, p.lon) for p in ring}
        if len(distinct) < 3:
            logger.warning("way %s has fewer than 3 distinct nodes; skipped", el.get("id"))
            continue

        footprints.append(
            BuildingFootprint(
                osm_id=int(el.get("id", 0)),
                ring=ring,
                height_m=_parse_height(tags.get("height")),
                levels=_parse_levels(tags.get("building:levels")),
                name=tags.get("name"),
            )
        )
    return footprints


def _parse_height(raw) -> float | None:
    if raw is None:
        return None
    m = _HEIGHT_RE.match(str(raw))
    if not m:
        logger.warning("unparseable height tag %r ignored", raw)
        return None
    return float(m.group(1))


def _parse_levels(raw) -> float | None:
    if raw is None:
        return None
    try:
        return float(str(raw).strip())
    except ValueError:
        logger.warning("unparseable building:levels tag %r ignored", raw)
        return None


def building_height(fp: BuildingFootprint) -> float:
    """Height inference chain: explicit tag, then levels, then a default.

    OSM height coverage is sparse; 3 m per level is the usual convention
    and 8 m stands in for a typical two-storey building.
    """
    if fp.height_m is not None and fp.height_m > 0:
        return fp.height_m
    if fp.levels is not None and fp.levels > 0:
        return fp.levels * METERS_PER_LEVEL
    return DEFAULT_BUILDING_HEIGHT


def fetch_overpass(
    bbox: tuple[float, float, float, float],
    url: str = "https://overpass-api.de/api/interpreter",
    timeout: float = 30.0,
) -> str:
    """Fetch building ways for a (south, west, north, east) bounding box.

    Network entry point for the CLI only; parsers never touch sockets.
    """
    import requests

    south, west, north, east = bbox
    query = (
        f"[out:json][timeout:{int(timeout)}];"
        f'way["building"]({south},{west},{north},{east});'
        "out geom;"
    )
    resp = requests.post(url, data={"data": query}, timeout=timeout)
    resp.raise_for_status()
    return resp.text
