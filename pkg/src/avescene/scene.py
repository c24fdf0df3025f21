"""The versioned scene aggregate: one value, one writer, many readers.

SceneState is treated as an immutable value; `apply` returns a new state
with `revision` exactly one higher, and whatever derived data a mutation
invalidates (projector masks, placements, trajectories) is recomputed as
part of that same revision. Rejected mutations raise and leave the old
value untouched, so a caller's revision never moves on failure.

The scene file is canonical JSON (sorted keys, 17-significant-digit
floats): identical states serialize to identical bytes, which golden
tests and the wire protocol both rely on. Mask bitsets serialize as hex
strings so arbitrary projector counts survive JavaScript clients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from datetime import datetime

from . import jsonio
from .detection import Detection, Placement, Trajectory, link_trajectories, place
from .errors import (
    DanglingReference,
    DomainError,
    ParseError,
    SchemaVersionError,
    Unplaceable,
)
from .geodesy import GeoCoord, LocalCoord, LocalFrame, UtmCoord, geo_to_local, local_to_utm, make_frame, utm_to_latlon
from .ingest.exif import ImageRecord, horizontal_fov
from .ingest.overpass import BuildingFootprint, building_height
from .ingest.terrain import TerrainGrid, sample_elevation
from .meshgen import (
    Mesh,
    Polygon2D,
    Surface,
    building_mesh,
    normalize_footprint,
    polygon_centroid,
    terrain_mesh,
)
from .projection import (
    Intrinsics,
    Projector,
    ProjectorPose,
    SurfaceMaskTable,
    assign_masks,
    project_uv_unclamped,
    texture_assignment,
)

logger = logging.getLogger(__name__)

SCENE_SCHEMA_VERSION = 1
DEFAULT_HFOV = 60.0  # used when an image carries no usable focal length
DEFAULT_EYE_HEIGHT = 1.6  # projector z seed when GPS altitude is absent


@dataclass(frozen=True)
class ProjectionSettings:
    """Knobs that apply() needs; stored in the scene so replaying the same
    mutations always yields the same state regardless of CLI config."""

    fan_nx: int = 32
    fan_ny: int = 18
    near: float = 0.1
    far: float = 500.0
    eye_height: float = DEFAULT_EYE_HEIGHT
    default_hfov: float = DEFAULT_HFOV


@dataclass
class SceneState:
    schema_version: int = SCENE_SCHEMA_VERSION
    revision: int = 0
    frame: LocalFrame | None = None
    settings: ProjectionSettings = field(default_factory=ProjectionSettings)
    images: list[ImageRecord] = field(default_factory=list)
    buildings: list[Mesh] = field(default_factory=list)
    terrain: Mesh | None = None
    projectors: list[Projector] = field(default_factory=list)
    mask_table: SurfaceMaskTable = field(default_factory=SurfaceMaskTable.empty)
    placements: list[Placement] = field(default_factory=list)
    trajectories: list[Trajectory] = field(default_factory=list)


# --- mutations ---------------------------------------------------------------


@dataclass(frozen=True)
class AddImage:
    image: ImageRecord


@dataclass(frozen=True)
class SetProjectorPose:
    projector_id: int
    pose: ProjectorPose


@dataclass(frozen=True)
class AddDetections:
    detections: tuple[Detection, ...]


@dataclass(frozen=True)
class RebuildGeometry:
    footprints: tuple[BuildingFootprint, ...]
    terrain: TerrainGrid | None = None


@dataclass(frozen=True)
class SetFrame:
    frame: LocalFrame


Mutation = AddImage | SetProjectorPose | AddDetections | RebuildGeometry | SetFrame


def all_surfaces(scene: SceneState) -> list[Surface]:
    surfaces: list[Surface] = []
    for mesh in scene.buildings:
        surfaces.extend(mesh.surfaces)
    if scene.terrain is not None:
        surfaces.extend(scene.terrain.surfaces)
    return surfaces


def images_by_id(scene: SceneState) -> dict[str, ImageRecord]:
    return {img.image_id: img for img in scene.images}


def projector_for_image(scene: SceneState, image_id: str) -> Projector | None:
    for p in scene.projectors:
        if p.image_id == image_id:
            return p
    return None


def apply(scene: SceneState, mutation: Mutation) -> SceneState:
    """Pure transition: same (scene, mutation) -> same new state, revision+1."""
    new = replace(
        scene,
        images=list(scene.images),
        buildings=list(scene.buildings),
        projectors=list(scene.projectors),
        placements=list(scene.placements),
    )

    if isinstance(mutation, AddImage):
        _apply_add_image(new, mutation.image)
    elif isinstance(mutation, SetProjectorPose):
        _apply_set_pose(new, mutation)
    elif isinstance(mutation, AddDetections):
        _apply_add_detections(new, mutation)
    elif isinstance(mutation, RebuildGeometry):
        _apply_rebuild(new, mutation)
    elif isinstance(mutation, SetFrame):
        _apply_set_frame(new, mutation.frame)
    else:
        raise DomainError(f"unknown mutation type {type(mutation).__name__}")

    _recompute_derived(new)
    new.revision = scene.revision + 1
    return new


def _seed_projector(scene: SceneState, image: ImageRecord, projector_id: int) -> Projector:
    """Starting pose for the manual calibration loop: the geotag position,
    heading as the initial yaw when present, level pitch."""
    assert scene.frame is not None
    if image.geo.alt is not None:
        z = image.geo.alt - scene.frame.base_elevation
    else:
        z = scene.settings.eye_height
    position = geo_to_local(image.geo, scene.frame, z=z)
    if image.focal35 is not None and not image.focal35_unscaled:
        hfov = horizontal_fov(image.focal35, image.width, image.height)
    else:
        hfov = scene.settings.default_hfov
    return Projector(
        projector_id=projector_id,
        image_id=image.image_id,
        pose=ProjectorPose(position=position, yaw=image.heading or 0.0, pitch=0.0, roll=0.0),
        intrinsics=Intrinsics(
            hfov=hfov,
            aspect=image.width / image.height,
            near=scene.settings.near,
            far=scene.settings.far,
        ),
        priority_timestamp=image.timestamp,
    )


def _apply_add_image(scene: SceneState, image: ImageRecord) -> None:
    if any(img.image_id == image.image_id for img in scene.images):
        raise DomainError(f"duplicate image_id {image.image_id!r}")
    if scene.frame is None:
        # first geotag anchors the scene until an explicit frame is set
        scene.frame = make_frame(image.geo)
    scene.images.append(image)
    scene.projectors.append(_seed_projector(scene, image, len(scene.projectors)))


def _apply_set_pose(scene: SceneState, mutation: SetProjectorPose) -> None:
    ids = [p.projector_id for p in scene.projectors]
    if mutation.projector_id not in ids:
        raise DanglingReference(
            f"projector {mutation.projector_id} not in scene (have {ids})"
        )
    idx = ids.index(mutation.projector_id)
    scene.projectors[idx] = replace(scene.projectors[idx], pose=mutation.pose)


def _apply_add_detections(scene: SceneState, mutation: AddDetections) -> None:
    known = images_by_id(scene)
    for det in mutation.detections:
        if det.image_id not in known:
            raise DanglingReference(f"detection references unknown image {det.image_id!r}")
        if projector_for_image(scene, det.image_id) is None:
            raise DanglingReference(f"image {det.image_id!r} has no projector")
    surfaces = all_surfaces(scene)
    for det in mutation.detections:
        proj = projector_for_image(scene, det.image_id)
        image = known[det.image_id]
        try:
            scene.placements.append(
                place(det, proj, image, surfaces, placement_id=len(scene.placements))
            )
        except Unplaceable as exc:
            logger.warning("detection skipped: %s", exc)


def _apply_rebuild(scene: SceneState, mutation: RebuildGeometry) -> None:
    if scene.frame is None:
        raise DomainError("cannot rebuild geometry: no local frame set")
    frame = scene.frame

    buildings: list[Mesh] = []
    next_surface_id = 0
    for fp in mutation.footprints:
        try:
            poly = normalize_footprint(fp.ring, frame)
        except DomainError as exc:
            logger.warning("footprint %s skipped: %s", fp.osm_id, exc)
            continue
        base_z = 0.0
        if mutation.terrain is not None:
            base_z = _drape_base(poly, mutation.terrain, frame)
        mesh = building_mesh(
            poly,
            height=building_height(fp),
            base_z=base_z,
            building_id=fp.osm_id,
            first_id=next_surface_id,
        )
        next_surface_id += len(mesh.surfaces)
        buildings.append(mesh)

    terrain = None
    if mutation.terrain is not None:
        terrain = terrain_mesh(mutation.terrain, frame, surface_id=next_surface_id)

    scene.buildings = buildings
    scene.terrain = terrain


def _drape_base(poly: Polygon2D, grid: TerrainGrid, frame: LocalFrame) -> float:
    """Building base elevation: terrain sample at the footprint centroid.

    Centroid draping (rather than per-vertex) keeps walls rectangular."""
    cx, cy = polygon_centroid(poly.vertices)
    try:
        if grid.geographic:
            geo = utm_to_latlon(local_to_utm(LocalCoord(cx, cy, 0.0), frame))
            value = sample_elevation(grid, geo.lon, geo.lat)
        else:
            value = sample_elevation(
                grid, cx + frame.anchor.easting, cy + frame.anchor.northing
            )
    except DomainError as exc:
        logger.warning("footprint centroid has no elevation (%s); base_z = 0", exc)
        return 0.0
    return value - frame.base_elevation


def _apply_set_frame(scene: SceneState, frame: LocalFrame) -> None:
    scene.frame = frame
    # reposition projector seeds in the new frame; orientation is kept
    # (it is the user's calibration), geometry stays until a rebuild
    by_id = images_by_id(scene)
    for i, proj in enumerate(scene.projectors):
        image = by_id[proj.image_id]
        if image.geo.alt is not None:
            z = image.geo.alt - frame.base_elevation
        else:
            z = scene.settings.eye_height
        position = geo_to_local(image.geo, frame, z=z)
        scene.projectors[i] = replace(
            proj, pose=replace(proj.pose, position=position)
        )


def _recompute_derived(scene: SceneState) -> None:
    surfaces = all_surfaces(scene)
    scene.mask_table = assign_masks(
        scene.projectors, surfaces, nx=scene.settings.fan_nx, ny=scene.settings.fan_ny
    )

    known = images_by_id(scene)
    new_placements: list[Placement] = []
    for pl in scene.placements:
        proj = projector_for_image(scene, pl.detection.image_id)
        image = known.get(pl.detection.image_id)
        if proj is None or image is None:
            logger.warning("placement %s lost its image; dropped", pl.placement_id)
            continue
        try:
            new_placements.append(
                place(pl.detection, proj, image, surfaces, placement_id=len(new_placements))
            )
        except Unplaceable as exc:
            logger.warning("placement dropped on recompute: %s", exc)
    scene.placements = new_placements
    scene.trajectories = link_trajectories(scene.placements)


# --- serialization -----------------------------------------------------------


def _opt(value, conv):
    return None if value is None else conv(value)


def _geo_to_dict(g: GeoCoord) -> dict:
    return {"lat": g.lat, "lon": g.lon, "alt": g.alt}


def _geo_from_dict(d: dict) -> GeoCoord:
    return GeoCoord(lat=float(d["lat"]), lon=float(d["lon"]), alt=_opt(d.get("alt"), float))


def _utm_to_dict(u: UtmCoord) -> dict:
    return {
        "zone": u.zone,
        "hemisphere": u.hemisphere,
        "easting": u.easting,
        "northing": u.northing,
    }


def _utm_from_dict(d: dict) -> UtmCoord:
    return UtmCoord(
        zone=int(d["zone"]),
        hemisphere=str(d["hemisphere"]),
        easting=float(d["easting"]),
        northing=float(d["northing"]),
    )


def _frame_to_dict(f: LocalFrame) -> dict:
    return {
        "anchor": _utm_to_dict(f.anchor),
        "anchor_geo": _geo_to_dict(f.anchor_geo),
        "base_elevation": f.base_elevation,
    }


def _frame_from_dict(d: dict) -> LocalFrame:
    return LocalFrame(
        anchor=_utm_from_dict(d["anchor"]),
        anchor_geo=_geo_from_dict(d["anchor_geo"]),
        base_elevation=float(d["base_elevation"]),
    )


def _xyz(c: LocalCoord) -> list[float]:
    return [c.x, c.y, c.z]


def _coord(v) -> LocalCoord:
    return LocalCoord(float(v[0]), float(v[1]), float(v[2]))


def _image_to_dict(img: ImageRecord) -> dict:
    return {
        "image_id": img.image_id,
        "source_path": img.source_path,
        "width": img.width,
        "height": img.height,
        "geo": _geo_to_dict(img.geo),
        "heading": img.heading,
        "timestamp": _opt(img.timestamp, jsonio.format_timestamp),
        "focal35": img.focal35,
        "focal35_unscaled": img.focal35_unscaled,
        "orientation": img.orientation,
    }


def _image_from_dict(d: dict) -> ImageRecord:
    return ImageRecord(
        image_id=str(d["image_id"]),
        source_path=str(d["source_path"]),
        width=int(d["width"]),
        height=int(d["height"]),
        geo=_geo_from_dict(d["geo"]),
        heading=_opt(d.get("heading"), float),
        timestamp=_opt(d.get("timestamp"), jsonio.parse_timestamp),
        focal35=_opt(d.get("focal35"), float),
        focal35_unscaled=bool(d.get("focal35_unscaled", False)),
        orientation=int(d.get("orientation", 1)),
    )


def _surface_to_dict(s: Surface) -> dict:
    return {
        "surface_id": s.surface_id,
        "kind": s.kind,
        "vertices": [_xyz(v) for v in s.vertices],
        "triangles": [list(t) for t in s.triangles],
        "normal": None if s.normal is None else list(s.normal),
    }


def _surface_from_dict(d: dict) -> Surface:
    normal = d.get("normal")
    return Surface(
        surface_id=int(d["surface_id"]),
        kind=str(d["kind"]),
        vertices=[_coord(v) for v in d["vertices"]],
        triangles=[tuple(int(i) for i in t) for t in d["triangles"]],
        normal=None if normal is None else tuple(float(x) for x in normal),
    )


def _mesh_to_dict(m: Mesh) -> dict:
    return {
        "building_id": m.building_id,
        "base_z": m.base_z,
        "surfaces": [_surface_to_dict(s) for s in m.surfaces],
    }


def _mesh_from_dict(d: dict) -> Mesh:
    return Mesh(
        surfaces=[_surface_from_dict(s) for s in d["surfaces"]],
        building_id=_opt(d.get("building_id"), int),
        base_z=float(d["base_z"]),
    )


def _projector_to_dict(p: Projector) -> dict:
    return {
        "projector_id": p.projector_id,
        "image_id": p.image_id,
        "pose": {
            "position": _xyz(p.pose.position),
            "yaw": p.pose.yaw,
            "pitch": p.pose.pitch,
            "roll": p.pose.roll,
        },
        "intrinsics": {
            "hfov": p.intrinsics.hfov,
            "aspect": p.intrinsics.aspect,
            "near": p.intrinsics.near,
            "far": p.intrinsics.far,
        },
        "priority_timestamp": _opt(p.priority_timestamp, jsonio.format_timestamp),
    }


def _projector_from_dict(d: dict) -> Projector:
    pose = d["pose"]
    intr = d["intrinsics"]
    return Projector(
        projector_id=int(d["projector_id"]),
        image_id=str(d["image_id"]),
        pose=ProjectorPose(
            position=_coord(pose["position"]),
            yaw=float(pose["yaw"]),
            pitch=float(pose["pitch"]),
            roll=float(pose["roll"]),
        ),
        intrinsics=Intrinsics(
            hfov=float(intr["hfov"]),
            aspect=float(intr["aspect"]),
            near=float(intr["near"]),
            far=float(intr["far"]),
        ),
        priority_timestamp=_opt(d.get("priority_timestamp"), jsonio.parse_timestamp),
    )


def _mask_table_to_dict(t: SurfaceMaskTable) -> dict:
    return {
        "bitsets": {str(sid): format(bits, "x") for sid, bits in t.bitsets.items()},
        "pool": {format(bits, "x"): pid for bits, pid in t.pool.items()},
    }


def _mask_table_from_dict(d: dict) -> SurfaceMaskTable:
    return SurfaceMaskTable(
        bitsets={int(sid): int(bits, 16) for sid, bits in d["bitsets"].items()},
        pool={int(bits, 16): int(pid) for bits, pid in d["pool"].items()},
    )


def _detection_to_dict(det: Detection) -> dict:
    return {
        "image_id": det.image_id,
        "class_label": det.class_label,
        "confidence": det.confidence,
        "bbox": list(det.bbox),
        "identity": det.identity,
    }


def _detection_from_dict(d: dict) -> Detection:
    return Detection(
        image_id=str(d["image_id"]),
        class_label=str(d["class_label"]),
        confidence=float(d["confidence"]),
        bbox=tuple(float(v) for v in d["bbox"]),
        identity=_opt(d.get("identity"), str),
    )


def _placement_to_dict(pl: Placement) -> dict:
    return {
        "placement_id": pl.placement_id,
        "detection": _detection_to_dict(pl.detection),
        "position": _xyz(pl.position),
        "anchored_on": pl.anchored_on,
        "timestamp": _opt(pl.timestamp, jsonio.format_timestamp),
    }


def _placement_from_dict(d: dict) -> Placement:
    return Placement(
        placement_id=int(d["placement_id"]),
        detection=_detection_from_dict(d["detection"]),
        position=_coord(d["position"]),
        anchored_on=int(d["anchored_on"]),
        timestamp=_opt(d.get("timestamp"), jsonio.parse_timestamp),
    )


def scene_to_dict(scene: SceneState) -> dict:
    return {
        "schema_version": scene.schema_version,
        "revision": scene.revision,
        "frame": None if scene.frame is None else _frame_to_dict(scene.frame),
        "settings": {
            "fan_nx": scene.settings.fan_nx,
            "fan_ny": scene.settings.fan_ny,
            "near": scene.settings.near,
            "far": scene.settings.far,
            "eye_height": scene.settings.eye_height,
            "default_hfov": scene.settings.default_hfov,
        },
        "images": [_image_to_dict(i) for i in scene.images],
        "buildings": [_mesh_to_dict(m) for m in scene.buildings],
        "terrain": None if scene.terrain is None else _mesh_to_dict(scene.terrain),
        "projectors": [_projector_to_dict(p) for p in scene.projectors],
        "mask_table": _mask_table_to_dict(scene.mask_table),
        "placements": [_placement_to_dict(p) for p in scene.placements],
        "trajectories": [
            {"identity": t.identity, "points": list(t.points)} for t in scene.trajectories
        ],
    }


def scene_from_dict(doc: dict) -> SceneState:
    if not isinstance(doc, dict):
        raise ParseError("scene document must be a JSON object", path="$")
    version = doc.get("schema_version")
    if version != SCENE_SCHEMA_VERSION:
        raise SchemaVersionError(version, SCENE_SCHEMA_VERSION)
    try:
        settings = doc.get("settings", {})
        return SceneState(
            schema_version=SCENE_SCHEMA_VERSION,
            revision=int(doc["revision"]),
            frame=None if doc.get("frame") is None else _frame_from_dict(doc["frame"]),
            settings=ProjectionSettings(
                fan_nx=int(settings.get("fan_nx", 32)),
                fan_ny=int(settings.get("fan_ny", 18)),
                near=float(settings.get("near", 0.1)),
                far=float(settings.get("far", 500.0)),
                eye_height=float(settings.get("eye_height", DEFAULT_EYE_HEIGHT)),
                default_hfov=float(settings.get("default_hfov", DEFAULT_HFOV)),
            ),
            images=[_image_from_dict(v) for v in doc.get("images", [])],
            buildings=[_mesh_from_dict(v) for v in doc.get("buildings", [])],
            terrain=None if doc.get("terrain") is None else _mesh_from_dict(doc["terrain"]),
            projectors=[_projector_from_dict(v) for v in doc.get("projectors", [])],
            mask_table=_mask_table_from_dict(
                doc.get("mask_table", {"bitsets": {}, "pool": {}})
            ),
            placements=[_placement_from_dict(v) for v in doc.get("placements", [])],
            trajectories=[
                Trajectory(identity=str(t["identity"]), points=[int(p) for p in t["points"]])
                for t in doc.get("trajectories", [])
            ],
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (ParseError, SchemaVersionError)):
            raise
        raise ParseError(f"bad scene document: {exc!r}") from exc


def save(scene: SceneState) -> bytes:
    return jsonio.canonical_dump_bytes(scene_to_dict(scene))


def load(data: bytes | str) -> SceneState:
    return scene_from_dict(jsonio.loads(data, what="scene file"))


# wire-facing aliases: the protocol builds mutations from message bodies
image_to_dict = _image_to_dict
image_from_dict = _image_from_dict
detection_to_dict = _detection_to_dict
detection_from_dict = _detection_from_dict


def pose_to_dict(pose: ProjectorPose) -> dict:
    return {
        "position": _xyz(pose.position),
        "yaw": pose.yaw,
        "pitch": pose.pitch,
        "roll": pose.roll,
    }


# --- OBJ export --------------------------------------------------------------


def export_obj(scene: SceneState, mtl_name: str = "scene.mtl") -> tuple[str, str]:
    """Scene geometry as OBJ + MTL text, one object group per surface.

    Texture coordinates come from the surface's assigned projector;
    vertices the projector cannot see are clamped into [0,1] and flagged
    with a comment. With no projectors the OBJ has no vt lines at all.
    """
    assignment = texture_assignment(scene.mask_table, scene.projectors)
    projectors = {p.projector_id: p for p in scene.projectors}
    images = images_by_id(scene)

    obj: list[str] = [
        "# avescene scene export",
        "# coordinates: right-handed, z-up (x east, y north, z up), meters",
    ]
    used_projectors: list[int] = []
    if assignment:
        obj.append(f"mtllib {mtl_name}")

    f = jsonio.format_float
    v_base = 1  # OBJ indices are 1-based
    vt_base = 1
    for surface in sorted(all_surfaces(scene), key=lambda s: s.surface_id):
        obj.append(f"o surface_{surface.surface_id:04d}_{surface.kind}")
        pid = assignment.get(surface.surface_id)
        for v in surface.vertices:
            obj.append(f"v {f(v.x)} {f(v.y)} {f(v.z)}")
        has_vt = pid is not None
        if has_vt:
            if pid not in used_projectors:
                used_projectors.append(pid)
            obj.append(f"usemtl proj_{pid}")
            proj = projectors[pid]
            for v in surface.vertices:
                u, vv, depth = project_uv_unclamped(proj, v)
                inside = 0.0 <= u <= 1.0 and 0.0 <= vv <= 1.0 and depth > 0
                cu = min(max(u, 0.0), 1.0)
                cv = min(max(vv, 0.0), 1.0)
                if not inside:
                    obj.append("# next vt clamped: vertex outside projector frustum")
                # OBJ vt has origin bottom-left; image v runs top-down
                obj.append(f"vt {f(cu)} {f(1.0 - cv)}")
        for tri in surface.triangles:
            if has_vt:
                obj.append(
                    "f "
                    + " ".join(f"{v_base + i}/{vt_base + i}" for i in tri)
                )
            else:
                obj.append("f " + " ".join(str(v_base + i) for i in tri))
        v_base += len(surface.vertices)
        if has_vt:
            vt_base += len(surface.vertices)

    mtl: list[str] = ["# avescene materials"]
    for pid in used_projectors:
        proj = projectors[pid]
        image = images.get(proj.image_id)
        mtl.append(f"newmtl proj_{pid}")
        mtl.append("Kd 1 1 1")
        if image is not None:
            mtl.append(f"map_Kd {image.source_path}")
    return "\n".join(obj) + "\n", "\n".join(mtl) + "\n"
