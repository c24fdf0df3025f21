"""External detector output -> 3D placements -> identity trajectories.

Detections are ingested from a versioned file schema, never computed
here: the detector is an external tool (see tools/yolo_adapter.py for a
converter from one real detector's output). Each detection is anchored in
the scene by casting a ray through its bounding box's bottom-center pixel
(the foot point, where a grounded object meets the ground) and taking the
nearest surface or ground-plane hit.

Identity labels come from the detection file; there is deliberately no
appearance matching or re-identification here.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import datetime

from .errors import DanglingReference, ParseError, SchemaVersionError, Unplaceable
from .geodesy import LocalCoord
from .ingest.exif import ImageRecord
from . import jsonio
from .meshgen import Surface
from .projection import Projector, Ray, intersect, ray_through

logger = logging.getLogger(__name__)

DETECTION_SCHEMA_VERSION = 1
GROUND_SURFACE_ID = -1  # anchored_on sentinel for the implicit z=0 plane


@dataclass
class Detection:
    image_id: str
    class_label: str
    confidence: float
    bbox: tuple[float, float, float, float]  # (x, y, w, h) pixels, top-left origin
    identity: str | None = None


@dataclass
class Placement:
    placement_id: int
    detection: Detection
    position: LocalCoord
    anchored_on: int  # surface_id, or GROUND_SURFACE_ID
    timestamp: datetime | None


@dataclass
class Trajectory:
    identity: str
    points: list[int]  # placement_ids in time order


def parse_detections(
    doc: str | bytes | dict, images: dict[str, ImageRecord]
) -> list[Detection]:
    """Parse and validate a detection interchange document.

    Schema (version 1):

        {
          "schema_version": 1,
          "detections": [
            {"image_id": "...", "class_label": "person",
             "confidence": 0.93, "bbox": [x, y, w, h],
             "identity": "person-a"}          # identity optional
          ]
        }

    An unknown image_id raises DanglingReference. Records with an invalid
    confidence or a bbox outside the referenced image are rejected
    per-record with a warning, never fatally.
    """
    data = doc if isinstance(doc, dict) else jsonio.loads(doc, what="detection file")
    if not isinstance(data, dict):
        raise ParseError("detection document must be a JSON object", path="$")
    version = data.get("schema_version")
    if version != DETECTION_SCHEMA_VERSION:
        raise SchemaVersionError(version, DETECTION_SCHEMA_VERSION)
    records = data.get("detections")
    if not isinstance(records, list):
        raise ParseError("missing 'detections' array", path="$.detections")

    out: list[Detection] = []
    for i, rec in enumerate(records):
        path = f"$.detections[{i}]"
        if not isinstance(rec, dict):
            raise ParseError("detection is not an object", path=path)
        try:
            image_id = str(rec["image_id"])
            class_label = str(rec["class_label"])
            confidence = float(rec["confidence"])
            x, y, w, h = (float(v) for v in rec["bbox"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad detection record: {exc}", path=path) from exc

        if image_id not in images:
            raise DanglingReference(f"{path}: unknown image_id {image_id!r}")
        img = images[image_id]

        if not 0.0 <= confidence <= 1.0:
            logger.warning("%s: confidence %s outside [0, 1]; record rejected", path, confidence)
            continue
        if w <= 0 or h <= 0:
            logger.warning("%s: non-positive bbox size %sx%s; record rejected", path, w, h)
            continue
        if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
            logger.warning(
                "%s: bbox (%s, %s, %s, %s) outside %sx%s image; record rejected",
                path, x, y, w, h, img.width, img.height,
            )
            continue

        identity = rec.get("identity")
        out.append(
            Detection(
                image_id=image_id,
                class_label=class_label,
                confidence=confidence,
                bbox=(x, y, w, h),
                identity=None if identity is None else str(identity),
            )
        )
    return out


def foot_ray(det: Detection, proj: Projector, image: ImageRecord) -> Ray:
    """Ray through the bbox bottom-center pixel, where the object grounds."""
    x, y, w, h = det.bbox
    u = (x + w / 2) / image.width
    v = (y + h) / image.height
    return ray_through(proj, u, v)


def place(
    det: Detection,
    proj: Projector,
    image: ImageRecord,
    surfaces: list[Surface],
    placement_id: int = 0,
) -> Placement:
    """Anchor a detection at the nearest hit of its foot ray, considering
    every scene surface plus the implicit ground plane z = 0."""
    ray = foot_ray(det, proj, image)
    near, far = proj.intrinsics.near, proj.intrinsics.far

    best_t = math.inf
    anchored_on = None
    hit = intersect(ray, surfaces, near=near, far=far)
    if hit is not None:
        anchored_on, best_t = hit

    ground = False
    dz = ray.direction[2]
    if dz < 0.0:
        t_ground = -ray.origin.z / dz
        if near <= t_ground <= far and t_ground < best_t:
            best_t = t_ground
            anchored_on = GROUND_SURFACE_ID
            ground = True

    if anchored_on is None:
        raise Unplaceable(
            f"foot ray of {det.class_label!r} in image {det.image_id!r} exits the scene"
        )

    if ground:
        # ratio form: lands exactly on z=0 and keeps symmetric geometry
        # (e.g. a 45-degree foot ray) free of extra rounding
        drop = -ray.origin.z
        position = LocalCoord(
            x=ray.origin.x + drop * (ray.direction[0] / dz),
            y=ray.origin.y + drop * (ray.direction[1] / dz),
            z=0.0,
        )
    else:
        position = LocalCoord(
            x=ray.origin.x + best_t * ray.direction[0],
            y=ray.origin.y + best_t * ray.direction[1],
            z=ray.origin.z + best_t * ray.direction[2],
        )
    return Placement(
        placement_id=placement_id,
        detection=det,
        position=position,
        anchored_on=anchored_on,
        timestamp=image.timestamp,
    )


def link_trajectories(placements: list[Placement]) -> list[Trajectory]:
    """Group placements by identity and order each group by timestamp.

    Placements without an identity cannot be linked and are excluded with
    a warning. Within an identity, placements lacking a timestamp sort
    after the timestamped ones; ties keep placement_id order (stable).
    """
    groups: dict[str, list[Placement]] = {}
    for pl in placements:
        identity = pl.detection.identity
        if identity is None:
            logger.warning(
                "placement %s (%s) has no identity label; excluded from trajectories",
                pl.placement_id, pl.detection.class_label,
            )
            continue
        groups.setdefault(identity, []).append(pl)

    trajectories = []
    for identity in sorted(groups):
        members = sorted(
            groups[identity],
            key=lambda pl: (pl.timestamp is None, pl.timestamp or datetime.min, pl.placement_id),
        )
        trajectories.append(
            Trajectory(identity=identity, points=[pl.placement_id for pl in members])
        )
    return trajectories
