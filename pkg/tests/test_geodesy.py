import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from avescene.errors import DomainError
from avescene.geodesy import (
    GeoCoord,
    LocalFrame,
    UtmCoord,
    geo_to_local,
    latlon_to_utm,
    local_to_utm,
    make_frame,
    utm_to_latlon,
    utm_to_local,
    zone_for,
)


class TestZoneFor:
    def test_zone_arithmetic(self):
        assert zone_for(3, 0) == 31

    def test_lower_boundary(self):
        assert zone_for(-180, 10) == 1

    def test_london(self):
        assert zone_for(-0.12, 51.5) == 30

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            zone_for(180, 0)
        with pytest.raises(DomainError):
            zone_for(-180.01, 0)


class TestLatlonToUtm:
    def test_central_meridian_equator(self):
        u = latlon_to_utm(GeoCoord(0, 3))
        assert u.zone == 31
        assert u.hemisphere == "north"
        assert u.easting == pytest.approx(500000.0, abs=1e-6)
        assert u.northing == pytest.approx(0.0, abs=1e-6)

    def test_equator_zone_edge(self):
        # frozen from the exact-projection oracle (tests/oracles)
        u = latlon_to_utm(GeoCoord(0, 0))
        assert u.zone == 31
        assert u.easting == pytest.approx(166021.44308053955, abs=1e-3)
        assert u.northing == pytest.approx(0.0, abs=1e-3)

    def test_london(self):
        u = latlon_to_utm(GeoCoord(51.5007, -0.1246))
        assert u.zone == 30
        assert u.easting == pytest.approx(699567.5395487971, abs=1e-3)
        assert u.northing == pytest.approx(5709427.5625037, abs=1e-3)

    def test_southern_hemisphere_false_northing(self):
        u = latlon_to_utm(GeoCoord(-33.865, 151.21))  # Sydney
        assert u.hemisphere == "south"
        assert u.northing > 6000000

    def test_outside_validity_band(self):
        with pytest.raises(DomainError):
            latlon_to_utm(GeoCoord(85, 0))
        with pytest.raises(DomainError):
            latlon_to_utm(GeoCoord(-81, 0))

    def test_oracle_agreement(self, geodesy_oracle):
        for p in geodesy_oracle:
            u = latlon_to_utm(GeoCoord(p["lat"], p["lon"]))
            assert u.zone == p["zone"]
            assert u.easting == pytest.approx(p["easting"], abs=1e-3)
            assert u.northing == pytest.approx(p["northing"], abs=1e-3)

    def test_round_trip_inverse(self, geodesy_oracle):
        for p in geodesy_oracle:
            u = latlon_to_utm(GeoCoord(p["lat"], p["lon"]))
            g = utm_to_latlon(u)
            assert g.lat == pytest.approx(p["lat"], abs=1e-9)
            assert g.lon == pytest.approx(p["lon"], abs=1e-9)


class TestUtmToLocal:
    def _frame(self):
        return make_frame(GeoCoord(51.5007, -0.1246))

    def test_anchor_maps_to_origin(self):
        frame = self._frame()
        loc = utm_to_local(frame.anchor, frame)
        assert (loc.x, loc.y, loc.z) == (0.0, 0.0, 0.0)

    def test_pure_translation(self):
        frame = self._frame()
        p = UtmCoord(
            zone=frame.anchor.zone,
            hemisphere=frame.anchor.hemisphere,
            easting=frame.anchor.easting + 12.5,
            northing=frame.anchor.northing - 3,
        )
        loc = utm_to_local(p, frame)
        assert loc.x == pytest.approx(12.5)
        assert loc.y == pytest.approx(-3.0)
        assert loc.z == 0.0

    def test_zone_mismatch_names_both_zones(self):
        frame = make_frame(GeoCoord(0, 3))  # zone 31
        p = UtmCoord(zone=30, hemisphere="north", easting=500000, northing=0)
        with pytest.raises(DomainError, match="30.*31|31.*30"):
            utm_to_local(p, frame)

    def test_local_round_trip(self):
        frame = self._frame()
        p = UtmCoord(
            zone=frame.anchor.zone,
            hemisphere=frame.anchor.hemisphere,
            easting=frame.anchor.easting + 250.0,
            northing=frame.anchor.northing + 77.25,
        )
        back = local_to_utm(utm_to_local(p, frame), frame)
        assert back.easting == pytest.approx(p.easting, abs=1e-9)
        assert back.northing == pytest.approx(p.northing, abs=1e-9)


@given(
    dx1=st.floats(-2000, 2000),
    dy1=st.floats(-2000, 2000),
    dx2=st.floats(-2000, 2000),
    dy2=st.floats(-2000, 2000),
)
def test_translation_preserves_distances(dx1, dy1, dx2, dy2):
    frame = make_frame(GeoCoord(48.8584, 2.2945))
    a = UtmCoord(
        zone=frame.anchor.zone, hemisphere="north",
        easting=frame.anchor.easting + dx1, northing=frame.anchor.northing + dy1,
    )
    b = UtmCoord(
        zone=frame.anchor.zone, hemisphere="north",
        easting=frame.anchor.easting + dx2, northing=frame.anchor.northing + dy2,
    )
    la, lb = utm_to_local(a, frame), utm_to_local(b, frame)
    d_local = math.hypot(la.x - lb.x, la.y - lb.y)
    d_utm = math.hypot(a.easting - b.easting, a.northing - b.northing)
    assert d_local == d_utm  # exact: translation only


@given(lat=st.floats(-70, 70), lon_base=st.floats(-170, 160))
def test_easting_monotonic_in_longitude(lat, lon_base):
    # stay inside one zone, away from its edges
    zone = zone_for(lon_base, lat)
    lon0 = (zone - 1) * 6 - 180 + 3
    lons = [lon0 - 2.0, lon0 - 0.7, lon0, lon0 + 1.1, lon0 + 2.3]
    eastings = [latlon_to_utm(GeoCoord(lat, lon)).easting for lon in lons]
    assert all(e1 < e2 for e1, e2 in zip(eastings, eastings[1:]))


def test_geo_to_local_composition():
    frame = make_frame(GeoCoord(51.5, -0.12))
    loc = geo_to_local(GeoCoord(51.5, -0.12), frame)
    assert abs(loc.x) < 1e-9 and abs(loc.y) < 1e-9


def test_geocoord_validation():
    with pytest.raises(DomainError):
        GeoCoord(91, 0)
    with pytest.raises(DomainError):
        GeoCoord(0, -181)
