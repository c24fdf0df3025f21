import math
import random
from datetime import datetime, timezone

import pytest

from avescene.detection import (
    GROUND_SURFACE_ID,
    Detection,
    Placement,
    Trajectory,
    foot_ray,
    link_trajectories,
    parse_detections,
    place,
)
from avescene.errors import DanglingReference, SchemaVersionError, Unplaceable
from avescene.geodesy import GeoCoord, LocalCoord
from avescene.ingest.exif import ImageRecord
from avescene.meshgen import Polygon2D, extrude_walls
from avescene.projection import Intrinsics, Projector, ProjectorPose, project_uv

from test_projection import make_projector, wall_facing_minus_y


def make_image(image_id="img", width=400, height=300, ts=None):
    return ImageRecord(
        image_id=image_id,
        source_path=f"{image_id}.jpg",
        width=width,
        height=height,
        geo=GeoCoord(51.5, -0.12),
        timestamp=ts,
    )


def detection_doc(*records):
    return {"schema_version": 1, "detections": list(records)}


def det_record(image_id="img", bbox=(100, 100, 50, 80), confidence=0.9, **extra):
    rec = {
        "image_id": image_id,
        "class_label": "person",
        "confidence": confidence,
        "bbox": list(bbox),
    }
    rec.update(extra)
    return rec


class TestParseDetections:
    def test_counts(self):
        images = {"img": make_image()}
        doc = detection_doc(
            det_record(), det_record(bbox=(10, 10, 30, 60)),
            det_record(class_label="car") | {"class_label": "car"},
        )
        dets = parse_detections(doc, images)
        assert len(dets) == 3
        assert dets[2].class_label == "car"

    def test_confidence_out_of_range_rejected(self):
        images = {"img": make_image()}
        dets = parse_detections(detection_doc(det_record(confidence=1.2)), images)
        assert dets == []

    def test_bbox_outside_image_rejected(self):
        images = {"img": make_image(width=200, height=200)}
        doc = detection_doc(det_record(bbox=(150, 150, 100, 100)), det_record(bbox=(0, 0, 50, 50)))
        dets = parse_detections(doc, images)
        assert len(dets) == 1

    def test_unknown_image_id(self):
        with pytest.raises(DanglingReference, match="ghost"):
            parse_detections(detection_doc(det_record(image_id="ghost")), {"img": make_image()})

    def test_version_checked(self):
        with pytest.raises(SchemaVersionError):
            parse_detections({"schema_version": 2, "detections": []}, {})

    def test_adapter_output_fixture(self, fixtures_dir):
        # converted output of the external-detector adapter (tools/yolo_adapter.py)
        images = {"street_cam_01": make_image("street_cam_01", width=1280, height=720)}
        dets = parse_detections((fixtures_dir / "detections_adapter.json").read_text(), images)
        assert len(dets) == 3
        assert {d.class_label for d in dets} == {"person", "car"}


class TestFootRay:
    def test_bottom_center_at_image_center_row(self):
        p = make_projector()
        img = make_image(width=400, height=300)
        det = Detection("img", "person", 0.9, (150, 50, 100, 100))  # bottom row y=150
        ray = foot_ray(det, p, img)
        # v = 150/300 = 0.5, u = 200/400 = 0.5: the center ray
        assert ray.direction == pytest.approx((0.0, 1.0, 0.0), abs=1e-12)

    def test_bottom_at_last_row(self):
        p = make_projector(hfov=90, aspect=4 / 3)
        img = make_image(width=400, height=300)
        det = Detection("img", "person", 0.9, (150, 200, 100, 100))
        ray = foot_ray(det, p, img)
        # v = 1.0: bottom frustum edge, pointing down at vfov/2 below forward
        assert ray.direction[2] < 0

    def test_full_image_bbox(self):
        p = make_projector()
        img = make_image(width=400, height=300)
        det = Detection("img", "person", 0.9, (0, 0, 400, 300))
        x, y, w, h = det.bbox
        assert (x + w / 2) / img.width == 0.5
        assert (y + h) / img.height == 1.0


class TestPlace:
    @staticmethod
    def _level_45_projector(z=1.5):
        # aspect chosen as tan(hfov/2) so the vertical half-extent is
        # exactly 1.0: the bottom-row foot ray then drops exactly 45 degrees
        # with bitwise-symmetric components
        aspect = math.tan(math.radians(90.0) / 2)
        return make_projector(z=z, hfov=90.0, aspect=aspect)

    def test_45_degree_ground_hit_exact(self):
        p = self._level_45_projector(z=1.5)
        img = make_image(width=400, height=300)
        det = Detection("img", "person", 0.9, (150, 200, 100, 100))  # bottom row: v=1.0
        pl = place(det, p, img, [])
        assert pl.anchored_on == GROUND_SURFACE_ID
        assert pl.position.z == 0.0
        assert pl.position.x == 0.0
        assert pl.position.y == 1.5  # horizontal offset equals camera height exactly

    def test_wall_hit_before_ground(self):
        wall = wall_facing_minus_y(1.0, surface_id=5)
        p = self._level_45_projector(z=1.5)
        img = make_image(width=400, height=300)
        det = Detection("img", "person", 0.9, (150, 200, 100, 100))  # 45 degrees down
        pl = place(det, p, img, [wall])
        assert pl.anchored_on == 5  # the wall is nearer than the ground hit

    def test_skyward_ray_unplaceable(self):
        p = make_projector(z=1.5, pitch=45.0)
        img = make_image()
        det = Detection("img", "bird", 0.9, (150, 0, 100, 50))
        with pytest.raises(Unplaceable):
            place(det, p, img, [])

    def test_random_poses_match_plane_oracle(self):
        rng = random.Random(20240811)
        img = make_image(width=1600, height=900)
        for _ in range(100):
            p = make_projector(
                x=rng.uniform(-50, 50),
                y=rng.uniform(-50, 50),
                z=rng.uniform(1.0, 10.0),
                yaw=rng.uniform(0, 360),
                pitch=rng.uniform(-60, -10),
                roll=rng.uniform(-15, 15),
                hfov=rng.uniform(50, 100),
                aspect=16 / 9,
            )
            w = rng.uniform(20, 400)
            h = rng.uniform(20, 300)
            x = rng.uniform(0, 1600 - w)
            y = rng.uniform(0, 900 - h)
            det = Detection("img", "person", 0.9, (x, y, w, h))
            ray = foot_ray(det, p, img)
            if ray.direction[2] >= -1e-6:
                continue
            t = -p.pose.position.z / ray.direction[2]
            if not (p.intrinsics.near <= t <= p.intrinsics.far):
                continue
            expected = (
                p.pose.position.x + t * ray.direction[0],
                p.pose.position.y + t * ray.direction[1],
                0.0,
            )
            pl = place(det, p, img, [])
            assert pl.anchored_on == GROUND_SURFACE_ID
            assert pl.position.x == pytest.approx(expected[0], abs=1e-6)
            assert pl.position.y == pytest.approx(expected[1], abs=1e-6)
            assert pl.position.z == pytest.approx(0.0, abs=1e-9)

    def test_placement_reprojection(self):
        # the 3D point must sit exactly under its 2D detection
        rng = random.Random(3)
        img = make_image(width=800, height=600)
        for _ in range(50):
            p = make_projector(
                z=rng.uniform(1.5, 6), yaw=rng.uniform(0, 360), pitch=rng.uniform(-50, -15),
                hfov=70, aspect=4 / 3,
            )
            w, h = rng.uniform(20, 200), rng.uniform(20, 200)
            x, y = rng.uniform(0, 800 - w), rng.uniform(0, 600 - h)
            det = Detection("img", "person", 0.9, (x, y, w, h))
            try:
                pl = place(det, p, img, [])
            except Unplaceable:
                continue
            uv = project_uv(p, pl.position)
            assert uv is not None
            assert uv[0] == pytest.approx((x + w / 2) / 800, abs=1e-6)
            assert uv[1] == pytest.approx((y + h) / 600, abs=1e-6)

    def test_timestamp_carried_from_image(self):
        ts = datetime(2023, 6, 1, 9, 30, tzinfo=timezone.utc)
        p = make_projector(z=1.5, hfov=90, aspect=0.5)
        img = make_image(ts=ts)
        det = Detection("img", "person", 0.9, (150, 25, 100, 200))
        assert place(det, p, img, []).timestamp == ts


def _placement(pid, identity, ts=None, label="person"):
    det = Detection("img", label, 0.9, (0, 0, 10, 10), identity=identity)
    return Placement(
        placement_id=pid,
        detection=det,
        position=LocalCoord(0, 0, 0),
        anchored_on=GROUND_SURFACE_ID,
        timestamp=ts,
    )


def _ts(s):
    return datetime(2023, 6, 1, 12, 0, s, tzinfo=timezone.utc)


class TestLinkTrajectories:
    def test_two_points_ordered(self):
        tr = link_trajectories([_placement(0, "A", _ts(10)), _placement(1, "A", _ts(5))])
        assert len(tr) == 1
        assert tr[0].identity == "A"
        assert tr[0].points == [1, 0]

    def test_single_point(self):
        tr = link_trajectories([_placement(0, "A", _ts(1))])
        assert tr == [Trajectory(identity="A", points=[0])]

    def test_shuffled_timestamps_sorted(self):
        pls = [
            _placement(0, "A", _ts(30)),
            _placement(1, "A", _ts(10)),
            _placement(2, "A", _ts(20)),
        ]
        assert link_trajectories(pls)[0].points == [1, 2, 0]

    def test_tie_keeps_placement_id_order(self):
        pls = [_placement(5, "A", _ts(10)), _placement(2, "A", _ts(10))]
        assert link_trajectories(pls)[0].points == [2, 5]

    def test_no_identity_excluded(self):
        tr = link_trajectories([_placement(0, None, _ts(1)), _placement(1, "B", _ts(2))])
        assert [t.identity for t in tr] == ["B"]

    def test_missing_timestamp_sorts_last(self):
        pls = [_placement(0, "A", None), _placement(1, "A", _ts(1))]
        assert link_trajectories(pls)[0].points == [1, 0]

    def test_groups_sorted_by_identity(self):
        pls = [_placement(0, "B", _ts(1)), _placement(1, "A", _ts(1))]
        assert [t.identity for t in link_trajectories(pls)] == ["A", "B"]

    def test_order_invariant_under_permutation(self):
        rng = random.Random(11)
        pls = [_placement(i, "X", _ts(rng.randint(0, 50))) for i in range(20)]
        base = link_trajectories(pls)[0].points
        for _ in range(10):
            shuffled = pls[:]
            rng.shuffle(shuffled)
            assert link_trajectories(shuffled)[0].points == base
