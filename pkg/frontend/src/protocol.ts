// Wire vocabulary shared with the engine's websocket bridge.
// Each stream message is one JSON envelope: {"body": …, "msg_id": n, "msg_type": t}

export const MSG_HELLO = 1;
export const MSG_ACK = 2;
export const MSG_ERR = 3;
export const MSG_GET_SCENE = 4;
export const MSG_SCENE_SNAPSHOT = 5;
export const MSG_SET_POSE = 6;
export const MSG_ADD_IMAGE = 7;
export const MSG_ADD_DETECTIONS = 8;
export const MSG_SCENE_EVENT = 9;

export interface Envelope {
  msg_id: number;
  msg_type: number;
  body: Record<string, unknown>;
}

export interface Pose {
  position: [number, number, number];
  yaw: number;
  pitch: number;
  roll: number;
}

export interface Intrinsics {
  hfov: number;
  aspect: number;
  near: number;
  far: number;
}

export interface ProjectorRecord {
  projector_id: number;
  image_id: string;
  pose: Pose;
  intrinsics: Intrinsics;
  priority_timestamp: string | null;
}

export interface SurfaceRecord {
  surface_id: number;
  kind: "wall" | "roof" | "ground";
  vertices: [number, number, number][];
  triangles: [number, number, number][];
  normal: [number, number, number] | null;
}

export interface MeshRecord {
  building_id: number | null;
  base_z: number;
  surfaces: SurfaceRecord[];
}

export interface ImageRecordWire {
  image_id: string;
  source_path: string;
  width: number;
  height: number;
  heading: number | null;
  timestamp: string | null;
  focal35: number | null;
  orientation: number;
}

export interface DetectionWire {
  image_id: string;
  class_label: string;
  confidence: number;
  bbox: [number, number, number, number];
  identity: string | null;
}

export interface PlacementWire {
  placement_id: number;
  detection: DetectionWire;
  position: [number, number, number];
  anchored_on: number;
  timestamp: string | null;
}

export interface TrajectoryWire {
  identity: string;
  points: number[];
}

export interface MaskTableWire {
  bitsets: Record<string, string>; // surface_id -> hex bitset
  pool: Record<string, number>; // hex bitset -> pool id
}

export interface SceneSnapshot {
  schema_version: number;
  revision: number;
  images: ImageRecordWire[];
  buildings: MeshRecord[];
  terrain: MeshRecord | null;
  projectors: ProjectorRecord[];
  mask_table: MaskTableWire;
  placements: PlacementWire[];
  trajectories: TrajectoryWire[];
}

export function parseEnvelope(raw: string): Envelope {
  const doc = JSON.parse(raw) as Envelope;
  if (typeof doc !== "object" || doc === null) {
    throw new Error("envelope must be a JSON object");
  }
  if (typeof doc.msg_type !== "number") {
    throw new Error("envelope missing msg_type");
  }
  return { msg_id: doc.msg_id ?? 0, msg_type: doc.msg_type, body: doc.body ?? {} };
}

export function encodeEnvelope(msgId: number, msgType: number, body: unknown): string {
  return JSON.stringify({ msg_id: msgId, msg_type: msgType, body: body ?? {} });
}

/** Surfaces seen by a projector, from the hex bitset table. */
export function maskBit(bitsetHex: string, projectorId: number): boolean {
  // hex strings keep arbitrary-width masks safe in JS
  const bits = BigInt("0x" + (bitsetHex === "" ? "0" : bitsetHex));
  return ((bits >> BigInt(projectorId)) & 1n) === 1n;
}

/** One texturing projector per surface: latest priority timestamp wins,
 *  ties break toward the lower projector id (mirrors the engine rule). */
export function textureAssignment(
  table: MaskTableWire,
  projectors: ProjectorRecord[],
): Map<number, number> {
  const out = new Map<number, number>();
  for (const [sid, hex] of Object.entries(table.bitsets)) {
    let best: ProjectorRecord | null = null;
    for (const p of projectors) {
      if (!maskBit(hex, p.projector_id)) continue;
      if (best === null) {
        best = p;
        continue;
      }
      const a = p.priority_timestamp ?? "";
      const b = best.priority_timestamp ?? "";
      if (a > b || (a === b && p.projector_id < best.projector_id)) {
        best = p;
      }
    }
    if (best !== null) {
      out.set(Number(sid), best.projector_id);
    }
  }
  return out;
}
