// Manual extrinsic calibration: the user nudges position/yaw/pitch/roll,
// sees the photo projection move live (preview pose), and each control
// release commits a SET_POSE. Server rejection reverts to the last
// acknowledged pose; a broadcast from another client rebases the control
// (last writer wins on screen).

import type { ViewerSession } from "./connection.js";
import type { Pose } from "./protocol.js";

export function clonePose(pose: Pose): Pose {
  return {
    position: [...pose.position] as [number, number, number],
    yaw: pose.yaw,
    pitch: pose.pitch,
    roll: pose.roll,
  };
}

export class CalibrationControl {
  lastAcked: Pose;
  preview: Pose | null = null;
  dragging = false;

  constructor(public projectorId: number, initial: Pose) {
    this.lastAcked = clonePose(initial);
  }

  /** Pose the renderer should draw right now. */
  get displayed(): Pose {
    return this.preview ?? this.lastAcked;
  }

  beginDrag(): void {
    this.dragging = true;
    this.preview = clonePose(this.lastAcked);
  }

  updatePreview(change: Partial<Pose>): Pose {
    if (this.preview === null) {
      this.preview = clonePose(this.lastAcked);
    }
    if (change.position) this.preview.position = [...change.position];
    if (change.yaw !== undefined) this.preview.yaw = change.yaw;
    if (change.pitch !== undefined) this.preview.pitch = change.pitch;
    if (change.roll !== undefined) this.preview.roll = change.roll;
    return this.preview;
  }

  nudge(field: "yaw" | "pitch" | "roll", delta: number): Pose {
    const base = this.preview ?? clonePose(this.lastAcked);
    this.preview = base;
    base[field] += delta;
    return base;
  }

  /** Commit the preview; on server ERR the control reverts. */
  async commit(session: ViewerSession): Promise<number | null> {
    this.dragging = false;
    if (this.preview === null) return null;
    const candidate = clonePose(this.preview);
    try {
      const revision = await session.setPose(this.projectorId, candidate);
      this.lastAcked = candidate;
      this.preview = null;
      return revision;
    } catch (err) {
      this.preview = null; // revert to lastAcked
      throw err;
    }
  }

  /** Another client moved this projector: rebase unless mid-drag. */
  rebase(broadcast: Pose): void {
    this.lastAcked = clonePose(broadcast);
    if (!this.dragging) {
      this.preview = null;
    }
  }
}
