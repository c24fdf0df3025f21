"""Footprints and terrain grids -> triangle meshes with addressable surfaces.

Each wall, roof and ground element is its own Surface with a scene-unique
id so projector masks can address them individually. Buildings are
extruded prisms: one quad surface per footprint edge plus a flat roof from
ear-clipping triangulation. Holes (OSM multipolygon relations) are out of
scope; only closed ways are ingested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DegenerateFootprint, EmptyTerrain, NonSimplePolygon
from .geodesy import GeoCoord, LocalCoord, LocalFrame, latlon_to_utm, utm_to_local
from .ingest.terrain import TerrainGrid

VERTEX_MERGE_EPS = 0.01  # meters; below OSM coordinate precision at street scale
COLLINEAR_EAR_EPS = 1e-9  # m^2; ears flatter than this count as collinear
MIN_TRIANGLE_AREA = 1e-9  # m^2

KIND_WALL = "wall"
KIND_ROOF = "roof"
KIND_GROUND = "ground"


@dataclass
class Polygon2D:
    """Simple CCW polygon in local meters, no duplicated closing vertex."""

    vertices: list[tuple[float, float]]


@dataclass
class Surface:
    surface_id: int
    kind: str  # wall | roof | ground
    vertices: list[LocalCoord]
    triangles: list[tuple[int, int, int]]
    normal: tuple[float, float, float] | None = None  # planar surfaces only


@dataclass
class Mesh:
    surfaces: list[Surface] = field(default_factory=list)
    building_id: int | None = None
    base_z: float = 0.0


def signed_area(vertices: list[tuple[float, float]]) -> float:
    total = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return total / 2.0


def perimeter(vertices: list[tuple[float, float]]) -> float:
    n = len(vertices)
    return sum(
        math.hypot(vertices[(i + 1) % n][0] - vertices[i][0],
                   vertices[(i + 1) % n][1] - vertices[i][1])
        for i in range(n)
    )


def polygon_centroid(vertices: list[tuple[float, float]]) -> tuple[float, float]:
    area = signed_area(vertices)
    if abs(area) < 1e-12:
        xs = [v[0] for v in vertices]
        ys = [v[1] for v in vertices]
        return sum(xs) / len(xs), sum(ys) / len(ys)
    cx = cy = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        w = x1 * y2 - x2 * y1
        cx += (x1 + x2) * w
        cy += (y1 + y2) * w
    return cx / (6 * area), cy / (6 * area)


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def is_simple(vertices: list[tuple[float, float]]) -> bool:
    n = len(vertices)
    for i in range(n):
        a1, a2 = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            # skip segments sharing an endpoint
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b1, b2 = vertices[j], vertices[(j + 1) % n]
            if _segments_properly_intersect(a1, a2, b1, b2):
                return False
    return True


def normalize_footprint(ring: list[GeoCoord], frame: LocalFrame) -> Polygon2D:
    """Project a footprint ring into the local frame and clean it up:
    drop the duplicated closing vertex, merge vertices closer than 1 cm,
    and force counter-clockwise orientation."""
    pts = []
    for g in ring:
        utm = latlon_to_utm(g, force_zone=frame.anchor.zone)
        loc = utm_to_local(utm, frame)
        pts.append((loc.x, loc.y))

    if len(pts) > 1 and math.hypot(pts[0][0] - pts[-1][0], pts[0][1] - pts[-1][1]) < VERTEX_MERGE_EPS:
        pts.pop()

    merged: list[tuple[float, float]] = []
    for p in pts:
        if merged and math.hypot(p[0] - merged[-1][0], p[1] - merged[-1][1]) < VERTEX_MERGE_EPS:
            continue
        merged.append(p)
    while len(merged) > 1 and math.hypot(
        merged[0][0] - merged[-1][0], merged[0][1] - merged[-1][1]
    ) < VERTEX_MERGE_EPS:
        merged.pop()

    if len(merged) < 3:
        raise DegenerateFootprint(f"footprint has {len(merged)} distinct vertices after cleaning")

    area = signed_area(merged)
    if abs(area) < MIN_TRIANGLE_AREA:
        raise DegenerateFootprint("footprint area is zero")
    if area < 0:
        merged.reverse()
    if not is_simple(merged):
        raise NonSimplePolygon("footprint ring self-intersects")
    return Polygon2D(vertices=merged)


def triangulate(fp: Polygon2D) -> list[tuple[int, int, int]]:
    """Ear-clipping triangulation of a simple CCW polygon.

    Returns exactly n-2 index triples. Ear candidates are scanned from the
    lowest remaining vertex index so output is deterministic.
    """
    verts = fp.vertices
    n = len(verts)
    if n < 3:
        raise DegenerateFootprint(f"cannot triangulate {n} vertices")
    area = signed_area(verts)
    if abs(area) < MIN_TRIANGLE_AREA:
        raise DegenerateFootprint("polygon area is zero")
    if area < 0:
        raise NonSimplePolygon("polygon must be counter-clockwise")
    if not is_simple(verts):
        raise NonSimplePolygon("polygon self-intersects")

    if n == 3:
        return [(0, 1, 2)]

    remaining = list(range(n))
    triangles: list[tuple[int, int, int]] = []

    def cross_at(pos: int) -> float:
        ip, ic, inx = (
            remaining[pos - 1],
            remaining[pos],
            remaining[(pos + 1) % len(remaining)],
        )
        ax, ay = verts[ip]
        bx, by = verts[ic]
        cx, cy = verts[inx]
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)

    def is_ear(pos: int) -> bool:
        cross = cross_at(pos)
        if cross < -2 * COLLINEAR_EAR_EPS:
            return False  # reflex
        ip, ic, inx = (
            remaining[pos - 1],
            remaining[pos],
            remaining[(pos + 1) % len(remaining)],
        )
        a, b, c = verts[ip], verts[ic], verts[inx]
        for other in remaining:
            if other in (ip, ic, inx):
                continue
            # boundary-touching vertices block too: a reflex vertex exactly
            # on the candidate diagonal would make the clip invalid
            if _point_inside_or_on(verts[other], a, b, c):
                return False
        return True

    while len(remaining) > 3:
        clipped = False
        for pos in range(len(remaining)):
            if is_ear(pos):
                ip, ic, inx = (
                    remaining[pos - 1],
                    remaining[pos],
                    remaining[(pos + 1) % len(remaining)],
                )
                triangles.append((ip, ic, inx))
                remaining.pop(pos)
                clipped = True
                break
        if not clipped:
            raise NonSimplePolygon("no ear found; polygon is not simple within tolerance")

    triangles.append((remaining[0], remaining[1], remaining[2]))
    return triangles


def _point_inside_or_on(p, a, b, c) -> bool:
    eps = 1e-12
    d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
    d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
    return d1 >= -eps and d2 >= -eps and d3 >= -eps


def extrude_walls(fp: Polygon2D, height: float, base_z: float, first_id: int = 0) -> list[Surface]:
    """One quad wall per polygon edge, outward-facing for a CCW footprint."""
    if height <= 0:
        raise DegenerateFootprint(f"extrusion height must be positive, got {height}")
    walls = []
    n = len(fp.vertices)
    top = base_z + height
    for i in range(n):
        ax, ay = fp.vertices[i]
        bx, by = fp.vertices[(i + 1) % n]
        length = math.hypot(bx - ax, by - ay)
        # outward normal: edge direction rotated -90 degrees in the x-y plane
        nx, ny = (by - ay) / length, -(bx - ax) / length
        verts = [
            LocalCoord(ax, ay, base_z),
            LocalCoord(bx, by, base_z),
            LocalCoord(bx, by, top),
            LocalCoord(ax, ay, top),
        ]
        walls.append(
            Surface(
                surface_id=first_id + i,
                kind=KIND_WALL,
                vertices=verts,
                triangles=[(0, 1, 2), (0, 2, 3)],
                normal=(nx, ny, 0.0),
            )
        )
    return walls


def roof_surface(fp: Polygon2D, z: float, surface_id: int = 0) -> Surface:
    triangles = triangulate(fp)
    verts = [LocalCoord(x, y, z) for x, y in fp.vertices]
    return Surface(
        surface_id=surface_id,
        kind=KIND_ROOF,
        vertices=verts,
        triangles=triangles,
        normal=(0.0, 0.0, 1.0),
    )


def building_mesh(
    fp: Polygon2D,
    height: float,
    base_z: float = 0.0,
    building_id: int | None = None,
    first_id: int = 0,
) -> Mesh:
    """Walls plus flat roof at base_z + height (roofs: no shape data in OSM ways)."""
    walls = extrude_walls(fp, height, base_z, first_id=first_id)
    roof = roof_surface(fp, base_z + height, surface_id=first_id + len(walls))
    return Mesh(surfaces=walls + [roof], building_id=building_id, base_z=base_z)


def terrain_mesh(grid: TerrainGrid, frame: LocalFrame, surface_id: int = 0) -> Mesh:
    """Grid cells -> two triangles each; cells touching a NODATA node are
    omitted. Vertices are local ENU with z relative to frame.base_elevation."""
    node_index: dict[tuple[int, int], int] = {}
    vertices: list[LocalCoord] = []
    triangles: list[tuple[int, int, int]] = []

    def local_xy(row: int, col: int) -> tuple[float, float]:
        if grid.geographic:
            g = GeoCoord(lat=grid.node_y(row), lon=grid.node_x(col))
            utm = latlon_to_utm(g, force_zone=frame.anchor.zone)
            loc = utm_to_local(utm, frame)
            return loc.x, loc.y
        return grid.node_x(col) - frame.anchor.easting, grid.node_y(row) - frame.anchor.northing

    def vertex(row: int, col: int) -> int:
        key = (row, col)
        if key not in node_index:
            x, y = local_xy(row, col)
            z = float(grid.values[row, col]) - frame.base_elevation
            node_index[key] = len(vertices)
            vertices.append(LocalCoord(x, y, z))
        return node_index[key]

    for r in range(grid.nrows - 1):
        for c in range(grid.ncols - 1):
            corners = [(r, c), (r, c + 1), (r + 1, c + 1), (r + 1, c)]
            if any(grid.is_nodata(cr, cc) for cr, cc in corners):
                continue
            nw = vertex(r, c)
            ne = vertex(r, c + 1)
            se = vertex(r + 1, c + 1)
            sw = vertex(r + 1, c)
            # CCW seen from above (+z): both triangles share the NW-SE diagonal
            triangles.append((nw, sw, se))
            triangles.append((nw, se, ne))

    if not triangles:
        raise EmptyTerrain("terrain grid has no usable cells (all NODATA)")

    surface = Surface(
        surface_id=surface_id,
        kind=KIND_GROUND,
        vertices=vertices,
        triangles=triangles,
        normal=None,
    )
    return Mesh(surfaces=[surface], building_id=None, base_z=0.0)


def surface_area(s: Surface) -> float:
    total = 0.0
    for i, j, k in s.triangles:
        a, b, c = s.vertices[i], s.vertices[j], s.vertices[k]
        ux, uy, uz = b.x - a.x, b.y - a.y, b.z - a.z
        vx, vy, vz = c.x - a.x, c.y - a.y, c.z - a.z
        cx = uy * vz - uz * vy
        cy = uz * vx - ux * vz
        cz = ux * vy - uy * vx
        total += math.sqrt(cx * cx + cy * cy + cz * cz) / 2.0
    return total


# re-export: elevation sampling is part of this module's contract
from .ingest.terrain import sample_elevation  # noqa: E402,F401
