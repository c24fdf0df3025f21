"""Photographs as perspective projectors over the scene's surfaces.

Conventions, used consistently by every function here:

  camera frame   right = +x, up = +z, forward = +y (north) at identity pose
  yaw            degrees about world z, 0 faces north, clockwise positive
                 (yaw 90 faces east)
  pitch          degrees, positive tilts the view up
  roll           degrees, right-handed about the forward axis
  image (u, v)   normalized view-plane coordinates, (0,0) top-left like
                 pixel coordinates, u right, v down

A surface is textured by a projector only when the projector's ray fan
actually reaches it first: nearest-hit raycasting both prevents images
bleeding onto surfaces behind the intended one (back projection) and
ignores interior wall faces via back-face culling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import DomainError
from .geodesy import LocalCoord
from .meshgen import Surface

DEFAULT_NEAR = 0.1
DEFAULT_FAR = 500.0
DEFAULT_FAN_NX = 32
DEFAULT_FAN_NY = 18
MT_EPSILON = 1e-9

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_RAY_CHUNK = 8192


@dataclass(frozen=True)
class Intrinsics:
    hfov: float  # degrees
    aspect: float  # width / height
    near: float = DEFAULT_NEAR
    far: float = DEFAULT_FAR

    def __post_init__(self):
        if not 0 < self.hfov < 180:
            raise DomainError(f"hfov {self.hfov} outside (0, 180)")
        if self.aspect <= 0:
            raise DomainError(f"aspect {self.aspect} must be positive")
        if not 0 < self.near < self.far:
            raise DomainError(f"need 0 < near < far, got near={self.near} far={self.far}")

    def view_plane_half_extents(self) -> tuple[float, float]:
        half_w = math.tan(math.radians(self.hfov) / 2)
        return half_w, half_w / self.aspect


@dataclass(frozen=True)
class ProjectorPose:
    position: LocalCoord
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0


@dataclass(frozen=True)
class Projector:
    projector_id: int  # dense 0..P-1 within a scene
    image_id: str
    pose: ProjectorPose
    intrinsics: Intrinsics
    priority_timestamp: datetime | None = None


@dataclass(frozen=True)
class Ray:
    origin: LocalCoord
    direction: tuple[float, float, float]  # unit length


@dataclass
class SurfaceMaskTable:
    """Per-surface bitsets of projector indices plus the bitset pool.

    Bitsets are arbitrary-width Python ints (bit k set when projector k
    sees the surface), so there is no 32-layer ceiling; two surfaces share
    a pool_id exactly when their bitsets are equal.
    """

    bitsets: dict[int, int]
    pool: dict[int, int]

    @classmethod
    def empty(cls) -> "SurfaceMaskTable":
        return cls(bitsets={}, pool={})


def rotation_matrix(pose: ProjectorPose) -> np.ndarray:
    """World-from-camera rotation: intrinsic yaw, then pitch, then roll."""
    y = math.radians(pose.yaw)
    p = math.radians(pose.pitch)
    r = math.radians(pose.roll)
    cy, sy = math.cos(-y), math.sin(-y)  # clockwise-positive yaw
    cp, sp = math.cos(p), math.sin(p)
    cr, sr = math.cos(r), math.sin(r)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    ry = np.array([[cr, 0.0, sr], [0.0, 1.0, 0.0], [-sr, 0.0, cr]])
    return rz @ rx @ ry


def pose_axes(pose: ProjectorPose) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(right, up, forward) unit vectors in world coordinates."""
    m = rotation_matrix(pose)
    return m @ np.array([1.0, 0.0, 0.0]), m @ np.array([0.0, 0.0, 1.0]), m @ np.array([0.0, 1.0, 0.0])


def _fan_directions(p: Projector, nx: int, ny: int) -> np.ndarray:
    """(nx*ny, 3) unit directions through an endpoint-inclusive (u, v) grid."""
    if nx < 2 or ny < 2:
        raise DomainError(f"fan needs nx >= 2 and ny >= 2, got {nx}x{ny}")
    half_w, half_h = p.intrinsics.view_plane_half_extents()
    right, up, forward = pose_axes(p.pose)
    u = np.linspace(0.0, 1.0, nx)
    v = np.linspace(0.0, 1.0, ny)
    uu, vv = np.meshgrid(u, v)  # rows sweep v (top to bottom)
    x = (2 * uu - 1) * half_w
    y = (1 - 2 * vv) * half_h
    dirs = x.reshape(-1, 1) * right + y.reshape(-1, 1) * up + forward
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def ray_through(p: Projector, u: float, v: float) -> Ray:
    """Ray through normalized view-plane coordinates (u right, v down)."""
    half_w, half_h = p.intrinsics.view_plane_half_extents()
    right, up, forward = pose_axes(p.pose)
    d = (2 * u - 1) * half_w * right + (1 - 2 * v) * half_h * up + forward
    d = d / np.linalg.norm(d)
    return Ray(origin=p.pose.position, direction=(float(d[0]), float(d[1]), float(d[2])))


def projector_rays(p: Projector, nx: int, ny: int) -> list[Ray]:
    """Evenly distributed fan across the view plane, corners included."""
    dirs = _fan_directions(p, nx, ny)
    origin = p.pose.position
    return [Ray(origin=origin, direction=(float(d[0]), float(d[1]), float(d[2]))) for d in dirs]


class TrianglePack:
    """Surfaces flattened to numpy triangle arrays for batch raycasting."""

    def __init__(self, surfaces: list[Surface]):
        v0, e1, e2, ids = [], [], [], []
        for s in surfaces:
            pts = np.array([[v.x, v.y, v.z] for v in s.vertices], dtype=np.float64)
            for i, j, k in s.triangles:
                v0.append(pts[i])
                e1.append(pts[j] - pts[i])
                e2.append(pts[k] - pts[i])
                ids.append(s.surface_id)
        if v0:
            self.v0 = np.vstack(v0)
            self.e1 = np.vstack(e1)
            self.e2 = np.vstack(e2)
            self.surface_ids = np.array(ids, dtype=np.int64)
        else:
            self.v0 = np.zeros((0, 3))
            self.e1 = np.zeros((0, 3))
            self.e2 = np.zeros((0, 3))
            self.surface_ids = np.zeros(0, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.surface_ids)


def raycast_batch(
    pack: TrianglePack,
    origin: np.ndarray,
    dirs: np.ndarray,
    near: float,
    far: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest front-facing hit per ray (Moller-Trumbore, one-sided).

    Returns (surface_id, t) arrays; surface_id -1 where nothing was hit.
    Back faces are culled via the determinant sign, which for our CCW
    winding equals the normal-dot-direction test.
    """
    n = dirs.shape[0]
    hit_ids = np.full(n, -1, dtype=np.int64)
    hit_t = np.full(n, np.inf)
    if len(pack) == 0:
        return hit_ids, hit_t

    for start in range(0, n, _RAY_CHUNK):
        d = dirs[start:start + _RAY_CHUNK]  # (R,3)
        pvec = np.cross(d[:, None, :], pack.e2[None, :, :])  # (R,T,3)
        det = np.einsum("tk,rtk->rt", pack.e1, pvec)
        valid = det > MT_EPSILON  # front faces only

        inv_det = np.where(valid, 1.0 / np.where(valid, det, 1.0), 0.0)
        tvec = origin[None, None, :] - pack.v0[None, :, :]  # (1,T,3)
        u = np.einsum("rtk,rtk->rt", np.broadcast_to(tvec, pvec.shape), pvec) * inv_det
        valid &= (u >= 0.0) & (u <= 1.0)

        qvec = np.cross(tvec, pack.e1[None, :, :])  # (1,T,3)
        v = np.einsum("rk,rtk->rt", d, np.broadcast_to(qvec, (d.shape[0],) + qvec.shape[1:])) * inv_det
        valid &= (v >= 0.0) & (u + v <= 1.0)

        t = np.einsum("tk,rtk->rt", pack.e2, np.broadcast_to(qvec, (d.shape[0],) + qvec.shape[1:])) * inv_det
        valid &= (t >= near) & (t <= far)

        t = np.where(valid, t, np.inf)
        best = np.argmin(t, axis=1)
        rows = np.arange(d.shape[0])
        best_t = t[rows, best]
        hit = np.isfinite(best_t)
        hit_ids[start:start + d.shape[0]][hit] = pack.surface_ids[best[hit]]
        hit_t[start:start + d.shape[0]][hit] = best_t[hit]
    return hit_ids, hit_t


def intersect(
    ray: Ray,
    surfaces: list[Surface],
    near: float = DEFAULT_NEAR,
    far: float = DEFAULT_FAR,
) -> tuple[int, float] | None:
    """Nearest front-facing surface hit with t in [near, far], else None."""
    ox, oy, oz = ray.origin.x, ray.origin.y, ray.origin.z
    dx, dy, dz = ray.direction
    best: tuple[int, float] | None = None
    for s in surfaces:
        pts = s.vertices
        for i, j, k in s.triangles:
            a, b, c = pts[i], pts[j], pts[k]
            e1 = (b.x - a.x, b.y - a.y, b.z - a.z)
            e2 = (c.x - a.x, c.y - a.y, c.z - a.z)
            px = dy * e2[2] - dz * e2[1]
            py = dz * e2[0] - dx * e2[2]
            pz = dx * e2[1] - dy * e2[0]
            det = e1[0] * px + e1[1] * py + e1[2] * pz
            if det <= MT_EPSILON:  # back-facing or parallel
                continue
            inv = 1.0 / det
            tx, ty, tz = ox - a.x, oy - a.y, oz - a.z
            u = (tx * px + ty * py + tz * pz) * inv
            if u < 0.0 or u > 1.0:
                continue
            qx = ty * e1[2] - tz * e1[1]
            qy = tz * e1[0] - tx * e1[2]
            qz = tx * e1[1] - ty * e1[0]
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < 0.0 or u + v > 1.0:
                continue
            t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
            if t < near or t > far:
                continue
            if best is None or t < best[1]:
                best = (s.surface_id, t)
    return best


def visible_surfaces(
    p: Projector,
    surfaces: list[Surface],
    nx: int = DEFAULT_FAN_NX,
    ny: int = DEFAULT_FAN_NY,
    pack: TrianglePack | None = None,
) -> set[int]:
    """Union of nearest-hit surface ids over the projector's ray fan."""
    if pack is None:
        pack = TrianglePack(surfaces)
    dirs = _fan_directions(p, nx, ny)
    origin = np.array([p.pose.position.x, p.pose.position.y, p.pose.position.z])
    ids, _ = raycast_batch(pack, origin, dirs, p.intrinsics.near, p.intrinsics.far)
    return set(int(i) for i in ids[ids >= 0])


def assign_masks(
    projectors: list[Projector],
    surfaces: list[Surface],
    nx: int = DEFAULT_FAN_NX,
    ny: int = DEFAULT_FAN_NY,
) -> SurfaceMaskTable:
    """Bit k of a surface's mask is set when projector k sees it.

    Pool ids are dense, assigned over distinct bitset values in ascending
    numeric order, so the numbering is a pure function of the masks.
    """
    ids_sorted = sorted(p.projector_id for p in projectors)
    if ids_sorted != list(range(len(projectors))):
        raise DomainError(f"projector ids must be dense 0..P-1, got {ids_sorted}")

    bitsets = {s.surface_id: 0 for s in surfaces}
    pack = TrianglePack(surfaces)
    for p in sorted(projectors, key=lambda q: q.projector_id):
        for sid in visible_surfaces(p, surfaces, nx=nx, ny=ny, pack=pack):
            bitsets[sid] |= 1 << p.projector_id

    pool = {value: idx for idx, value in enumerate(sorted(set(bitsets.values())))}
    return SurfaceMaskTable(bitsets=bitsets, pool=pool)


def project_uv(p: Projector, point: LocalCoord) -> tuple[float, float] | None:
    """Normalized image coordinates of a world point, if inside the frustum.

    (0,0) is the image's top-left; result is present iff u, v land in
    [0,1] and the forward depth is within [near, far].
    """
    right, up, forward = pose_axes(p.pose)
    d = np.array(
        [point.x - p.pose.position.x, point.y - p.pose.position.y, point.z - p.pose.position.z]
    )
    depth = float(d @ forward)
    if depth < p.intrinsics.near or depth > p.intrinsics.far:
        return None
    half_w, half_h = p.intrinsics.view_plane_half_extents()
    x = float(d @ right) / depth
    y = float(d @ up) / depth
    u = (x / half_w + 1) / 2
    v = (1 - y / half_h) / 2
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        return None
    return u, v


def project_uv_unclamped(p: Projector, point: LocalCoord) -> tuple[float, float, float]:
    """(u, v, depth) without frustum tests; used for clamped exports."""
    right, up, forward = pose_axes(p.pose)
    d = np.array(
        [point.x - p.pose.position.x, point.y - p.pose.position.y, point.z - p.pose.position.z]
    )
    depth = float(d @ forward)
    half_w, half_h = p.intrinsics.view_plane_half_extents()
    safe_depth = depth if abs(depth) > 1e-12 else 1e-12
    u = (float(d @ right) / safe_depth / half_w + 1) / 2
    v = (1 - float(d @ up) / safe_depth / half_h) / 2
    return u, v, depth


def texture_assignment(
    table: SurfaceMaskTable, projectors: list[Projector]
) -> dict[int, int]:
    """Pick one texturing projector per surface: latest priority timestamp
    wins, ties break toward the lower projector id. Surfaces nobody sees
    get no assignment."""
    by_id = {p.projector_id: p for p in projectors}
    out: dict[int, int] = {}
    for sid, bits in table.bitsets.items():
        candidates = [pid for pid in by_id if bits >> pid & 1]
        if not candidates:
            continue
        out[sid] = max(
            candidates,
            key=lambda pid: (by_id[pid].priority_timestamp or _EPOCH, -pid),
        )
    return out
