import math
import random

import pytest

from avescene.errors import DegenerateFootprint, EmptyTerrain, NonSimplePolygon
from avescene.geodesy import GeoCoord, make_frame
from avescene.ingest import parse_overpass, parse_terrain
from avescene.meshgen import (
    KIND_GROUND,
    Polygon2D,
    building_mesh,
    extrude_walls,
    normalize_footprint,
    perimeter,
    polygon_centroid,
    roof_surface,
    signed_area,
    surface_area,
    terrain_mesh,
    triangulate,
)

from helpers import vincenty_distance

UNIT_SQUARE = Polygon2D([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
L_SHAPE = Polygon2D([(0, 0), (4, 0), (4, 2), (2, 2), (2, 4), (0, 4)])


def random_star_polygon(rng: random.Random, n: int) -> Polygon2D:
    """Random star-shaped polygon around the origin: angular increments are
    normalized to wrap the full circle (every gap < pi), so connecting the
    vertices in angle order is always simple."""
    weights = [rng.uniform(0.8, 1.2) for _ in range(n)]
    total = sum(weights)
    angles = []
    acc = rng.uniform(0, 2 * math.pi)
    for w in weights:
        angles.append(acc)
        acc += 2 * math.pi * w / total
    verts = [
        (r * math.cos(t), r * math.sin(t))
        for t, r in ((t, rng.uniform(2.0, 30.0)) for t in angles)
    ]
    return Polygon2D(verts)  # CCW by construction (increasing angle)


class TestNormalizeFootprint:
    def _frame(self):
        return make_frame(GeoCoord(51.4990, -0.1264))

    def test_clockwise_ring_forced_ccw(self):
        frame = self._frame()
        ring = [
            GeoCoord(51.4990, -0.1264),
            GeoCoord(51.4992, -0.1264),
            GeoCoord(51.4992, -0.1260),
            GeoCoord(51.4990, -0.1260),
        ]  # traced clockwise (lat up, then east)
        poly = normalize_footprint(ring, frame)
        assert signed_area(poly.vertices) > 0

    def test_duplicated_closing_vertex_removed(self):
        frame = self._frame()
        ring = [
            GeoCoord(51.4990, -0.1264),
            GeoCoord(51.4990, -0.1260),
            GeoCoord(51.4992, -0.1260),
            GeoCoord(51.4990, -0.1264),
        ]
        poly = normalize_footprint(ring, frame)
        assert len(poly.vertices) == 3

    def test_close_vertices_merged(self):
        frame = self._frame()
        ring = [
            GeoCoord(51.4990, -0.1264),
            GeoCoord(51.49900001, -0.12639999),  # < 1 cm away
            GeoCoord(51.4990, -0.1260),
            GeoCoord(51.4992, -0.1262),
        ]
        poly = normalize_footprint(ring, frame)
        assert len(poly.vertices) == 3

    def test_degenerate_rejected(self):
        frame = self._frame()
        ring = [GeoCoord(51.4990, -0.1264), GeoCoord(51.4990, -0.1260), GeoCoord(51.49900001, -0.12639999)]
        with pytest.raises(DegenerateFootprint):
            normalize_footprint(ring, frame)

    def test_self_intersecting_rejected(self):
        frame = self._frame()
        ring = [  # bow tie
            GeoCoord(51.4990, -0.1264),
            GeoCoord(51.4992, -0.1260),
            GeoCoord(51.4992, -0.1264),
            GeoCoord(51.4990, -0.1260),
        ]
        with pytest.raises(NonSimplePolygon):
            normalize_footprint(ring, frame)

    def test_perimeter_matches_geodesic_oracle(self, fixtures_dir):
        fps = parse_overpass((fixtures_dir / "overpass_block.json").read_text())
        frame = make_frame(GeoCoord(51.4990, -0.1264))
        for fp in fps:
            poly = normalize_footprint(fp.ring, frame)
            local_perim = perimeter(poly.vertices)
            ring = fp.ring
            geodesic_perim = sum(
                vincenty_distance(
                    ring[i].lat, ring[i].lon,
                    ring[(i + 1) % len(ring)].lat, ring[(i + 1) % len(ring)].lon,
                )
                for i in range(len(ring))
            )
            assert local_perim == pytest.approx(geodesic_perim, rel=1e-3)


class TestTriangulate:
    def test_unit_square(self):
        tris = triangulate(UNIT_SQUARE)
        assert len(tris) == 2
        assert _tri_area_sum(UNIT_SQUARE, tris) == pytest.approx(1.0, abs=1e-12)

    def test_convex_octagon(self):
        verts = [
            (math.cos(i * math.pi / 4), math.sin(i * math.pi / 4)) for i in range(8)
        ]
        tris = triangulate(Polygon2D(verts))
        assert len(tris) == 6

    def test_l_shape(self):
        tris = triangulate(L_SHAPE)
        assert len(tris) == 4
        assert _tri_area_sum(L_SHAPE, tris) == pytest.approx(12.0, abs=1e-9)

    def test_non_simple_rejected(self):
        # asymmetric bow tie: positive signed area but self-intersecting
        bowtie = Polygon2D([(0, 0), (4, 0), (1, 3), (3, 3)])
        with pytest.raises(NonSimplePolygon):
            triangulate(bowtie)

    def test_zero_area_rejected(self):
        collinear = Polygon2D([(0, 0), (1, 0), (2, 0)])
        with pytest.raises(DegenerateFootprint):
            triangulate(collinear)

    def test_deterministic(self):
        rng = random.Random(5)
        poly = random_star_polygon(rng, 12)
        assert triangulate(poly) == triangulate(poly)

    def test_random_polygons_properties(self):
        rng = random.Random(20240811)
        for _ in range(200):
            n = rng.randint(4, 24)
            poly = random_star_polygon(rng, n)
            tris = triangulate(poly)
            assert len(tris) == n - 2
            area = signed_area(poly.vertices)
            assert _tri_area_sum(poly, tris) == pytest.approx(area, rel=1e-9)
            _assert_no_overlap(poly, tris)


class TestExtrudeWalls:
    def test_unit_square_walls(self):
        walls = extrude_walls(UNIT_SQUARE, height=2.0, base_z=0.0)
        assert len(walls) == 4
        assert [w.normal for w in walls] == [
            (0.0, -1.0, 0.0),
            (1.0, 0.0, 0.0),
            (0.0, 1.0, 0.0),
            (-1.0, 0.0, 0.0),
        ]
        for w in walls:
            assert surface_area(w) == pytest.approx(2.0, abs=1e-12)

    def test_triangle_footprint(self):
        tri = Polygon2D([(0, 0), (3, 0), (0, 4)])
        assert len(extrude_walls(tri, 1.0, 0.0)) == 3

    def test_wall_area_equals_perimeter_times_height(self):
        rng = random.Random(7)
        for _ in range(20):
            poly = random_star_polygon(rng, rng.randint(4, 12))
            h = rng.uniform(2, 20)
            walls = extrude_walls(poly, h, base_z=0.0)
            total = sum(surface_area(w) for w in walls)
            assert total == pytest.approx(perimeter(poly.vertices) * h, rel=1e-9)

    def test_outwardness_for_convex_footprints(self):
        verts = [(5 * math.cos(i * math.pi / 3), 5 * math.sin(i * math.pi / 3)) for i in range(6)]
        poly = Polygon2D(verts)
        cx, cy = polygon_centroid(verts)
        for w in extrude_walls(poly, 3.0, 0.0):
            wx = sum(v.x for v in w.vertices) / 4 - cx
            wy = sum(v.y for v in w.vertices) / 4 - cy
            assert w.normal[0] * wx + w.normal[1] * wy > 0

    def test_building_mesh_ids_dense(self):
        mesh = building_mesh(UNIT_SQUARE, height=2.0, base_z=0.0, first_id=10)
        assert [s.surface_id for s in mesh.surfaces] == [10, 11, 12, 13, 14]
        assert mesh.surfaces[-1].kind == "roof"

    def test_roof_at_height(self):
        roof = roof_surface(UNIT_SQUARE, z=7.5)
        assert all(v.z == 7.5 for v in roof.vertices)
        assert roof.normal == (0.0, 0.0, 1.0)


class TestTerrainMesh:
    def _frame(self):
        # anchor at the grid's SW corner for easy local coordinates
        frame = make_frame(GeoCoord(0.001, 3.0))
        return frame

    def _grid(self, body: str, xll=None, yll=None, cellsize=10.0):
        frame = self._frame()
        xll = frame.anchor.easting if xll is None else xll
        yll = frame.anchor.northing if yll is None else yll
        rows = body.strip().splitlines()
        ncols = len(rows[0].split())
        header = (
            f"ncols {ncols}\nnrows {len(rows)}\nxllcorner {xll}\nyllcorner {yll}\n"
            f"cellsize {cellsize}\nNODATA_value -9999\n"
        )
        return parse_terrain(header + body), frame

    def test_single_cell_two_triangles(self):
        grid, frame = self._grid("1 2\n3 4")
        mesh = terrain_mesh(grid, frame)
        assert len(mesh.surfaces) == 1
        assert len(mesh.surfaces[0].triangles) == 2
        assert mesh.surfaces[0].kind == KIND_GROUND

    def test_nodata_cells_omitted(self):
        # NODATA at the top edge-center node: both top cells touch it
        grid, frame = self._grid("1 -9999 3\n4 5 6\n7 8 9")
        mesh = terrain_mesh(grid, frame)
        assert len(mesh.surfaces[0].triangles) == 4  # 2 of 4 cells kept

    def test_corner_nodata_omits_one_cell(self):
        grid, frame = self._grid("-9999 2 3\n4 5 6\n7 8 9")
        mesh = terrain_mesh(grid, frame)
        assert len(mesh.surfaces[0].triangles) == 6  # 3 of 4 cells kept

    def test_center_nodata_empties_2x2_cells(self):
        grid, frame = self._grid("1 2 3\n4 -9999 6\n7 8 9")
        with pytest.raises(EmptyTerrain):
            terrain_mesh(grid, frame)

    def test_flat_grid_normals_up(self):
        grid, frame = self._grid("5 5 5\n5 5 5\n5 5 5")
        mesh = terrain_mesh(grid, frame)
        s = mesh.surfaces[0]
        for i, j, k in s.triangles:
            a, b, c = s.vertices[i], s.vertices[j], s.vertices[k]
            nx = (b.y - a.y) * (c.z - a.z) - (b.z - a.z) * (c.y - a.y)
            ny = (b.z - a.z) * (c.x - a.x) - (b.x - a.x) * (c.z - a.z)
            nz = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
            norm = math.sqrt(nx * nx + ny * ny + nz * nz)
            assert (nx / norm, ny / norm, nz / norm) == pytest.approx((0, 0, 1), abs=1e-12)

    def test_z_relative_to_base_elevation(self):
        grid, frame0 = self._grid("5 5\n5 5")
        frame = make_frame(frame0.anchor_geo, base_elevation=2.0)
        mesh = terrain_mesh(grid, frame)
        assert all(v.z == 3.0 for v in mesh.surfaces[0].vertices)

    def test_no_nodata_vertices_emitted(self):
        grid, frame = self._grid("-9999 2 3\n4 5 6\n7 8 9")
        mesh = terrain_mesh(grid, frame)
        assert all(v.z > -100 for v in mesh.surfaces[0].vertices)


def _tri_area_sum(poly: Polygon2D, tris) -> float:
    total = 0.0
    for i, j, k in tris:
        a, b, c = poly.vertices[i], poly.vertices[j], poly.vertices[k]
        total += abs(
            (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        ) / 2
    return total


def _assert_no_overlap(poly: Polygon2D, tris):
    """Sample interior points of each triangle; none may fall strictly inside
    another triangle."""
    samples = []
    for idx, (i, j, k) in enumerate(tris):
        a, b, c = poly.vertices[i], poly.vertices[j], poly.vertices[k]
        for wa, wb, wc in ((1 / 3, 1 / 3, 1 / 3), (0.6, 0.2, 0.2), (0.2, 0.6, 0.2), (0.2, 0.2, 0.6)):
            samples.append(
                (
                    idx,
                    (
                        wa * a[0] + wb * b[0] + wc * c[0],
                        wa * a[1] + wb * b[1] + wc * c[1],
                    ),
                )
            )
    for idx, p in samples:
        for other_idx, (i, j, k) in enumerate(tris):
            if other_idx == idx:
                continue
            a, b, c = poly.vertices[i], poly.vertices[j], poly.vertices[k]
            d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
            d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
            assert not (d1 > 1e-9 and d2 > 1e-9 and d3 > 1e-9), (
                f"triangle {idx} sample point inside triangle {other_idx}"
            )
