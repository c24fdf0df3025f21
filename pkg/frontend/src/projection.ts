// Client-side twin of the engine's projector math, used for the live
// calibration preview and for computing texture UVs from snapshots.
// Conventions match the engine: x east, y north, z up; yaw clockwise from
// north; pitch positive up; (u, v) top-left of the image.

import type { Intrinsics, Pose } from "./protocol.js";

export type Vec3 = [number, number, number];

export interface Axes {
  right: Vec3;
  up: Vec3;
  forward: Vec3;
}

export function poseAxes(pose: Pose): Axes {
  const y = (-pose.yaw * Math.PI) / 180; // clockwise-positive yaw
  const p = (pose.pitch * Math.PI) / 180;
  const r = (pose.roll * Math.PI) / 180;
  const cy = Math.cos(y), sy = Math.sin(y);
  const cp = Math.cos(p), sp = Math.sin(p);
  const cr = Math.cos(r), sr = Math.sin(r);

  // Rz(-yaw) @ Rx(pitch) @ Ry(roll), applied to the canonical camera frame
  const m = [
    [cy * cr + -sy * sp * sr, -sy * cp, cy * sr - -sy * sp * cr],
    [sy * cr + cy * sp * sr, cy * cp, sy * sr - cy * sp * cr],
    [-cp * sr, sp, cp * cr],
  ];
  return {
    right: [m[0][0], m[1][0], m[2][0]],
    up: [m[0][2], m[1][2], m[2][2]],
    forward: [m[0][1], m[1][1], m[2][1]],
  };
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export interface UvDepth {
  u: number;
  v: number;
  depth: number;
}

/** Unclamped projective UV of a world point (no frustum test). */
export function projectUvUnclamped(
  pose: Pose,
  intrinsics: Intrinsics,
  point: Vec3,
): UvDepth {
  const axes = poseAxes(pose);
  const d: Vec3 = [
    point[0] - pose.position[0],
    point[1] - pose.position[1],
    point[2] - pose.position[2],
  ];
  const depth = dot(d, axes.forward);
  const halfW = Math.tan((intrinsics.hfov * Math.PI) / 360);
  const halfH = halfW / intrinsics.aspect;
  const safeDepth = Math.abs(depth) > 1e-12 ? depth : 1e-12;
  const u = (dot(d, axes.right) / safeDepth / halfW + 1) / 2;
  const v = (1 - dot(d, axes.up) / safeDepth / halfH) / 2;
  return { u, v, depth };
}

/** UV of a point if it is inside the frustum, else null. */
export function projectUv(
  pose: Pose,
  intrinsics: Intrinsics,
  point: Vec3,
): [number, number] | null {
  const { u, v, depth } = projectUvUnclamped(pose, intrinsics, point);
  if (depth < intrinsics.near || depth > intrinsics.far) return null;
  if (u < 0 || u > 1 || v < 0 || v > 1) return null;
  return [u, v];
}
